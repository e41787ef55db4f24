#pragma once

#include <optional>
#include <vector>

#include "fpplab/geometry.hpp"
#include "fpplab/models.hpp"

namespace fpplab {

struct CrossingProfile {
  std::vector<double> lines_x;
  std::vector<double> heights;   // height of FIRST crossing of each line
  std::vector<long> k_indices;   // floor(height / W)
};

struct CorridorQuery {
  enum class Mode { min, max };
  std::optional<Rect> rect;
  std::optional<Parallelogram> para;
  double side_sample_step = 0.125;
  Mode mode = Mode::min;
};

// Maximal perpendicular deviation of the path from its endpoint chord
// (vertices and edge midpoints).
double transversal_fluctuation(const Geodesic& g);

// Point on the polyline at normalized arc-length parameter t in [0,1].
Point point_along(const Geodesic& g, double t);

// First-crossing heights of the lines x = i*n, i = 1..M-1, for a path
// spanning x=0 to x=M*n.
CrossingProfile crossing_profile(const Geodesic& g, double n, int M, double W);

// tau_1 = sum |k_i - k_{i-1}| over the full crossing sequence including the
// boundary values k_0 = floor(start/W), k_M = floor(end/W).
double tau1_of_profile(const Geodesic& g, const CrossingProfile& p, double W);

// Min/max side-to-side passage time over discretized sides.
ModelInstance::SideResult corridor_passage(const ModelInstance& m, const CorridorQuery& q);

// Per-breakpoint concatenation defect (1/M)(sum of segment passage times - X_uv).
double gamma_defect(const ModelInstance& m, const Geodesic& g,
                    const std::vector<double>& breakpoints);

// Height H of the first intersection with the line x = n of the geodesic
// from (0,y1) to (M*n, y2).
double local_tf_audit(const ModelInstance& m, double n, double M, double y1, double y2);

}  // namespace fpplab
