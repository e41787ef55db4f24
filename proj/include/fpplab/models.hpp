#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "fpplab/delaunay.hpp"
#include "fpplab/field.hpp"
#include "fpplab/geometry.hpp"

namespace fpplab {

enum class ModelKind { voronoi, voronoi_weighted, howard_newman, rgg, riemannian };

struct RiemannianParams {
  double d1 = 0.5;
  double d2 = 1.5;
  double grid_step = 0.25;
  int connectivity = 8;  // 8 or 16
  Kernel kernel;
};

struct ModelSpec {
  ModelKind kind = ModelKind::howard_newman;
  double beta = 2.0;           // Howard-Newman exponent
  double rgg_threshold = 2.0;  // RGG edge length threshold L
  RiemannianParams riem;

  void validate() const {
    if (kind == ModelKind::howard_newman && !(beta > 1))
      throw std::invalid_argument("ModelSpec: beta must exceed 1");
    if (kind == ModelKind::rgg && !(rgg_threshold > 0))
      throw std::invalid_argument("ModelSpec: rgg_threshold must be positive");
    if (kind == ModelKind::riemannian) {
      if (!(riem.d1 > 0 && riem.d1 < riem.d2))
        throw std::invalid_argument("ModelSpec: need 0 < d1 < d2");
      if (riem.connectivity != 8 && riem.connectivity != 16)
        throw std::invalid_argument("ModelSpec: connectivity must be 8 or 16");
    }
  }
};

struct Geodesic {
  std::vector<Point> vertices;
  double passage_time = 0.0;
  std::vector<double> per_edge_costs;
};

struct WindowViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SubcriticalWindow : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CutoffTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One FPP metric bound to a realization of the environment.  Construction
// builds the model's derived structure (Delaunay adjacency, RGG components,
// or the smoothed Psi grid); afterwards the instance is immutable and
// queries may run concurrently.
class ModelInstance {
 public:
  struct Derived;

  ModelInstance(ModelSpec spec, FieldRealization field, double safety_margin = 0.0);

  const ModelSpec& spec() const { return spec_; }
  const FieldRealization& field() const { return *field_; }
  double safety_margin() const { return margin_; }

  Geodesic passage(const Point& u, const Point& v) const;

  // Passage time in the environment with the selected region resampled.
  ModelInstance resampled(const RegionSelector& sel, std::uint64_t seed) const;
  Geodesic passage_resampled(const Point& u, const Point& v, const RegionSelector& sel,
                             std::uint64_t seed) const;

  // Cost of an explicit polyline under this model's semantics (used as a
  // self-consistency check on returned geodesics).
  double path_cost(const std::vector<Point>& vertices) const;

  struct SideResult {
    double value = 0.0;
    Point arg_left{0, 0}, arg_right{0, 0};
  };
  // Min (one multi-source sweep) or max (per-source sweeps) of X_uv over the
  // given endpoint samples on two sides.
  SideResult side_to_side(const std::vector<Point>& left, const std::vector<Point>& right,
                          bool maximize) const;

  // RGG diagnostics.
  double giant_fraction() const;

  // Voronoi diagnostics.
  const std::vector<std::vector<int>>& delaunay_neighbors() const;

 private:
  void check_endpoint(const Point& p) const;

  ModelSpec spec_;
  std::shared_ptr<const FieldRealization> field_;
  double margin_;
  std::shared_ptr<const Derived> der_;
};

}  // namespace fpplab
