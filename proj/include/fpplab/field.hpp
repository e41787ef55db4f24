#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpplab/geometry.hpp"

namespace fpplab {

enum class FieldKind { poisson_marked, white_noise_grid };
enum class MarkLaw { exponential_unit, uniform_unit, constant_one };

// Radial bump kernel K(x) = (1 - |x/s|^2)^p on |x| <= s, normalized so K(0)=1.
struct Kernel {
  double support = 1.0;
  int exponent = 4;
  double operator()(const Point& d) const {
    double r2 = d.squaredNorm() / (support * support);
    if (r2 >= 1.0) return 0.0;
    double b = 1.0 - r2;
    double v = 1.0;
    for (int i = 0; i < exponent; ++i) v *= b;
    return v;
  }
};

struct FieldSpec {
  Rect window;
  FieldKind kind = FieldKind::poisson_marked;
  double ppp_rate = 1.0;
  MarkLaw mark_law = MarkLaw::exponential_unit;
  double grid_step = 0.25;  // white-noise discretization step
  std::uint64_t master_seed = 0;

  explicit FieldSpec(Rect w) : window(w) {}
  void validate() const;
};

struct FieldPoint {
  Point pos;
  double mark;
  double tiebreak;
};

// Axis-aligned lattice of nbx x nby blocks of size bw x bh anchored at
// (x0,y0); mask selects individual blocks, outside covers everything beyond
// the lattice.
struct BlockMask {
  double x0 = 0, y0 = 0, bw = 1, bh = 1;
  int nbx = 0, nby = 0;
  std::vector<char> mask;  // row-major, size nbx*nby
  bool outside = false;

  int block_of(const Point& p) const {  // -1 when outside the lattice
    double fx = (p.x() - x0) / bw, fy = (p.y() - y0) / bh;
    int i = static_cast<int>(std::floor(fx)), j = static_cast<int>(std::floor(fy));
    if (i < 0 || i >= nbx || j < 0 || j >= nby) return -1;
    return j * nbx + i;
  }
  bool contains(const Point& p) const {
    int b = block_of(p);
    return b < 0 ? outside : mask[b] != 0;
  }
};

// Region over which resampling acts: a rectangle, a vertical strip, the
// complement of either, or a mask over a block lattice (all intersected with
// the window).
struct RegionSelector {
  enum class Shape { rect, vstrip, complement_rect, complement_vstrip, blocks };
  Shape shape;
  std::optional<Rect> rect;
  std::optional<VStrip> strip;
  std::optional<BlockMask> block_mask;

  static RegionSelector from_rect(const Rect& r) {
    return {Shape::rect, r, std::nullopt, std::nullopt};
  }
  static RegionSelector from_vstrip(const VStrip& s) {
    return {Shape::vstrip, std::nullopt, s, std::nullopt};
  }
  static RegionSelector complement_of_rect(const Rect& r) {
    return {Shape::complement_rect, r, std::nullopt, std::nullopt};
  }
  static RegionSelector complement_of_vstrip(const VStrip& s) {
    return {Shape::complement_vstrip, std::nullopt, s, std::nullopt};
  }
  static RegionSelector from_blocks(BlockMask m) {
    return {Shape::blocks, std::nullopt, std::nullopt, std::move(m)};
  }

  bool contains(const Point& p) const {
    switch (shape) {
      case Shape::rect: return rect->contains(p);
      case Shape::vstrip: return strip->contains(p);
      case Shape::complement_rect: return !rect->contains(p);
      case Shape::complement_vstrip: return !strip->contains(p);
      case Shape::blocks: return block_mask->contains(p);
    }
    return false;
  }
  // Whether the unit cell [cx,cx+1) x [cy,cy+1) can meet the region.
  bool may_touch_cell(long cx, long cy) const;
};

// Immutable realization of the random environment over the window.  Every
// unit cell (and every white-noise grid node) is generated from its own
// counter-derived seed, so disjoint regions are functions of disjoint seeds
// and region resampling preserves the rest of the field bit-for-bit.
class FieldRealization {
 public:
  static FieldRealization sample(const FieldSpec& spec);
  FieldRealization resampled(const RegionSelector& sel, std::uint64_t resample_seed) const;

  const FieldSpec& spec() const { return spec_; }
  const std::vector<FieldPoint>& points() const { return points_; }

  // Index of the closest point to u; exact ties resolved by the smallest
  // tiebreak mark.  Throws if the field has no points.
  int nearest(const Point& u) const;

  // Point indices within Euclidean distance r of u.
  std::vector<int> points_within(const Point& u, double r) const;

  // Smoothed field value Phi(x): kernel sum over Poisson points, or the
  // grid_step-scaled discrete convolution of the white-noise grid.
  double smoothed_value(const Point& x, const Kernel& k) const;

  // White-noise grid accessors.
  int grid_nx() const { return nx_; }
  int grid_ny() const { return ny_; }
  double grid_value(int i, int j) const { return grid_[static_cast<std::size_t>(j) * nx_ + i]; }
  Point grid_node(int i, int j) const {
    return {spec_.window.x0 + i * spec_.grid_step, spec_.window.y0 + j * spec_.grid_step};
  }

  // Cell bucket layout (for spatial sweeps by model builders).
  long cell_x0() const { return cx0_; }
  long cell_y0() const { return cy0_; }
  int cells_x() const { return ncx_; }
  int cells_y() const { return ncy_; }
  // Point indices in cell (cx0+i, cy0+j).
  std::pair<const int*, const int*> cell_points(int i, int j) const;

 private:
  explicit FieldRealization(const FieldSpec& spec) : spec_(spec) {}
  void build_buckets();
  void sample_cell(long cx, long cy, std::uint64_t root, std::vector<FieldPoint>& out) const;

  FieldSpec spec_;
  std::vector<FieldPoint> points_;
  std::vector<double> grid_;
  int nx_ = 0, ny_ = 0;

  long cx0_ = 0, cy0_ = 0;
  int ncx_ = 0, ncy_ = 0;
  std::vector<int> bucket_start_;
  std::vector<int> bucket_pts_;
};

}  // namespace fpplab
