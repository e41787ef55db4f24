#include "fpplab/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fpplab/rng.hpp"

namespace fpplab {

namespace {
constexpr std::uint64_t kPointTag = 0x506f696e74ULL;
constexpr std::uint64_t kGridTag = 0x47726964ULL;
constexpr double kMaxExpectedPoints = 2e7;
constexpr double kMaxGridNodes = 5e7;

std::uint64_t u64(long v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v)); }
}  // namespace

void FieldSpec::validate() const {
  if (!(ppp_rate > 0)) throw std::invalid_argument("FieldSpec: ppp_rate must be positive");
  if (!(grid_step > 0)) throw std::invalid_argument("FieldSpec: grid_step must be positive");
  if (kind == FieldKind::poisson_marked && ppp_rate * window.area() > kMaxExpectedPoints)
    throw std::runtime_error("FieldSpec: window too large for memory budget");
  if (kind == FieldKind::white_noise_grid &&
      (window.width() / grid_step) * (window.height() / grid_step) > kMaxGridNodes)
    throw std::runtime_error("FieldSpec: grid too large for memory budget");
}

bool RegionSelector::may_touch_cell(long cx, long cy) const {
  double x0 = static_cast<double>(cx), x1 = x0 + 1.0;
  double y0 = static_cast<double>(cy), y1 = y0 + 1.0;
  switch (shape) {
    case Shape::rect:
      return x1 >= rect->x0 && x0 <= rect->x1 && y1 >= rect->y0 && y0 <= rect->y1;
    case Shape::vstrip:
      return x1 >= strip->x0 && x0 <= strip->x1;
    case Shape::complement_rect:
      return !(x0 >= rect->x0 && x1 <= rect->x1 && y0 >= rect->y0 && y1 <= rect->y1);
    case Shape::complement_vstrip:
      return !(x0 >= strip->x0 && x1 <= strip->x1);
    case Shape::blocks: {
      const BlockMask& m = *block_mask;
      int i0 = static_cast<int>(std::floor((x0 - m.x0) / m.bw));
      int i1 = static_cast<int>(std::floor((x1 - m.x0) / m.bw));
      int j0 = static_cast<int>(std::floor((y0 - m.y0) / m.bh));
      int j1 = static_cast<int>(std::floor((y1 - m.y0) / m.bh));
      if (m.outside && (i0 < 0 || j0 < 0 || i1 >= m.nbx || j1 >= m.nby)) return true;
      for (int j = std::max(j0, 0); j <= std::min(j1, m.nby - 1); ++j)
        for (int i = std::max(i0, 0); i <= std::min(i1, m.nbx - 1); ++i)
          if (m.mask[static_cast<std::size_t>(j) * m.nbx + i]) return true;
      return false;
    }
  }
  return true;
}

void FieldRealization::sample_cell(long cx, long cy, std::uint64_t root,
                                   std::vector<FieldPoint>& out) const {
  rng::Stream st(rng::derive(root, {u64(cx), u64(cy)}));
  int k = rng::poisson(st, spec_.ppp_rate);
  for (int i = 0; i < k; ++i) {
    Point p{cx + rng::uniform(st), cy + rng::uniform(st)};
    double mark;
    switch (spec_.mark_law) {
      case MarkLaw::exponential_unit: mark = rng::exponential(st); break;
      case MarkLaw::uniform_unit: mark = rng::uniform(st); break;
      case MarkLaw::constant_one: mark = 1.0; break;
      default: mark = 1.0;
    }
    double tiebreak = rng::uniform(st);
    if (spec_.window.contains(p)) out.push_back({p, mark, tiebreak});
  }
}

FieldRealization FieldRealization::sample(const FieldSpec& spec) {
  spec.validate();
  FieldRealization f(spec);
  f.cx0_ = static_cast<long>(std::floor(spec.window.x0));
  f.cy0_ = static_cast<long>(std::floor(spec.window.y0));
  f.ncx_ = static_cast<int>(std::ceil(spec.window.x1) - f.cx0_);
  f.ncy_ = static_cast<int>(std::ceil(spec.window.y1) - f.cy0_);

  if (spec.kind == FieldKind::poisson_marked) {
    std::uint64_t root = rng::derive(spec.master_seed, {kPointTag});
    f.points_.reserve(static_cast<std::size_t>(spec.ppp_rate * spec.window.area() * 1.2) + 16);
    for (int j = 0; j < f.ncy_; ++j)
      for (int i = 0; i < f.ncx_; ++i) f.sample_cell(f.cx0_ + i, f.cy0_ + j, root, f.points_);
  } else {
    f.nx_ = static_cast<int>(std::floor(spec.window.width() / spec.grid_step + 1e-9)) + 1;
    f.ny_ = static_cast<int>(std::floor(spec.window.height() / spec.grid_step + 1e-9)) + 1;
    f.grid_.resize(static_cast<std::size_t>(f.nx_) * f.ny_);
    for (int j = 0; j < f.ny_; ++j) {
      for (int i = 0; i < f.nx_; ++i) {
        rng::Stream st(rng::derive(spec.master_seed, {kGridTag, u64(i), u64(j)}));
        f.grid_[static_cast<std::size_t>(j) * f.nx_ + i] = rng::normal(st);
      }
    }
  }
  f.build_buckets();
  return f;
}

FieldRealization FieldRealization::resampled(const RegionSelector& sel,
                                             std::uint64_t resample_seed) const {
  FieldRealization g(spec_);
  g.cx0_ = cx0_;
  g.cy0_ = cy0_;
  g.ncx_ = ncx_;
  g.ncy_ = ncy_;
  g.nx_ = nx_;
  g.ny_ = ny_;

  if (spec_.kind == FieldKind::poisson_marked) {
    std::uint64_t root = rng::derive(resample_seed, {kPointTag});
    g.points_.reserve(points_.size() + 16);
    std::vector<FieldPoint> fresh;
    for (int j = 0; j < ncy_; ++j) {
      for (int i = 0; i < ncx_; ++i) {
        auto [b, e] = cell_points(i, j);
        if (!sel.may_touch_cell(cx0_ + i, cy0_ + j)) {
          for (auto it = b; it != e; ++it) g.points_.push_back(points_[*it]);
          continue;
        }
        for (auto it = b; it != e; ++it)
          if (!sel.contains(points_[*it].pos)) g.points_.push_back(points_[*it]);
        fresh.clear();
        sample_cell(cx0_ + i, cy0_ + j, root, fresh);
        for (const auto& p : fresh)
          if (sel.contains(p.pos)) g.points_.push_back(p);
      }
    }
  } else {
    g.grid_.resize(grid_.size());
    for (int j = 0; j < ny_; ++j) {
      for (int i = 0; i < nx_; ++i) {
        std::size_t idx = static_cast<std::size_t>(j) * nx_ + i;
        if (sel.contains(grid_node(i, j))) {
          rng::Stream st(rng::derive(resample_seed, {kGridTag, u64(i), u64(j)}));
          g.grid_[idx] = rng::normal(st);
        } else {
          g.grid_[idx] = grid_[idx];
        }
      }
    }
  }
  g.build_buckets();
  return g;
}

void FieldRealization::build_buckets() {
  std::size_t ncells = static_cast<std::size_t>(ncx_) * ncy_;
  bucket_start_.assign(ncells + 1, 0);
  bucket_pts_.resize(points_.size());
  auto cell_of = [&](const Point& p) -> std::size_t {
    long cx = static_cast<long>(std::floor(p.x())) - cx0_;
    long cy = static_cast<long>(std::floor(p.y())) - cy0_;
    cx = std::clamp(cx, 0L, static_cast<long>(ncx_ - 1));
    cy = std::clamp(cy, 0L, static_cast<long>(ncy_ - 1));
    return static_cast<std::size_t>(cy) * ncx_ + cx;
  };
  for (const auto& p : points_) ++bucket_start_[cell_of(p.pos) + 1];
  for (std::size_t c = 0; c < ncells; ++c) bucket_start_[c + 1] += bucket_start_[c];
  std::vector<int> fill(bucket_start_.begin(), bucket_start_.end() - 1);
  for (int i = 0; i < static_cast<int>(points_.size()); ++i)
    bucket_pts_[fill[cell_of(points_[i].pos)]++] = i;
}

std::pair<const int*, const int*> FieldRealization::cell_points(int i, int j) const {
  std::size_t c = static_cast<std::size_t>(j) * ncx_ + i;
  return {bucket_pts_.data() + bucket_start_[c], bucket_pts_.data() + bucket_start_[c + 1]};
}

int FieldRealization::nearest(const Point& u) const {
  if (points_.empty()) throw std::runtime_error("FieldRealization: nearest on empty field");
  long ix = std::clamp(static_cast<long>(std::floor(u.x())) - cx0_, 0L, static_cast<long>(ncx_ - 1));
  long iy = std::clamp(static_cast<long>(std::floor(u.y())) - cy0_, 0L, static_cast<long>(ncy_ - 1));
  double best_d2 = std::numeric_limits<double>::infinity();
  int best = -1;
  double best_tb = 0;
  int max_ring = std::max(ncx_, ncy_);
  for (int ring = 0; ring <= max_ring; ++ring) {
    if (ring > 1) {
      double dmin = ring - 1;
      if (dmin * dmin > best_d2 + 1e-9) break;
    }
    long ilo = ix - ring, ihi = ix + ring, jlo = iy - ring, jhi = iy + ring;
    for (long j = std::max(jlo, 0L); j <= std::min(jhi, static_cast<long>(ncy_ - 1)); ++j) {
      for (long i = std::max(ilo, 0L); i <= std::min(ihi, static_cast<long>(ncx_ - 1)); ++i) {
        if (std::max(std::abs(i - ix), std::abs(j - iy)) != ring) continue;
        auto [b, e] = cell_points(static_cast<int>(i), static_cast<int>(j));
        for (auto it = b; it != e; ++it) {
          const FieldPoint& p = points_[*it];
          double d2 = (p.pos - u).squaredNorm();
          double tol = 1e-12 * (1.0 + d2);
          if (best < 0 || d2 < best_d2 - tol) {
            best_d2 = d2;
            best = *it;
            best_tb = p.tiebreak;
          } else if (std::abs(d2 - best_d2) <= tol && p.tiebreak < best_tb) {
            best = *it;
            best_tb = p.tiebreak;
          }
        }
      }
    }
  }
  return best;
}

std::vector<int> FieldRealization::points_within(const Point& u, double r) const {
  std::vector<int> out;
  double r2 = r * r;
  long ilo = std::max(static_cast<long>(std::floor(u.x() - r)) - cx0_, 0L);
  long ihi = std::min(static_cast<long>(std::floor(u.x() + r)) - cx0_, static_cast<long>(ncx_ - 1));
  long jlo = std::max(static_cast<long>(std::floor(u.y() - r)) - cy0_, 0L);
  long jhi = std::min(static_cast<long>(std::floor(u.y() + r)) - cy0_, static_cast<long>(ncy_ - 1));
  for (long j = jlo; j <= jhi; ++j) {
    for (long i = ilo; i <= ihi; ++i) {
      auto [b, e] = cell_points(static_cast<int>(i), static_cast<int>(j));
      for (auto it = b; it != e; ++it)
        if ((points_[*it].pos - u).squaredNorm() <= r2) out.push_back(*it);
    }
  }
  return out;
}

double FieldRealization::smoothed_value(const Point& x, const Kernel& k) const {
  if (spec_.kind == FieldKind::poisson_marked) {
    double sum = 0;
    for (int idx : points_within(x, k.support)) sum += k(points_[idx].pos - x);
    return sum;
  }
  // White noise: Phi(x) ~ sum K(x-y_ij) dB_ij with dB_ij ~ step * N(0,1).
  double h = spec_.grid_step;
  int ilo = std::max(0, static_cast<int>(std::ceil((x.x() - k.support - spec_.window.x0) / h)));
  int ihi = std::min(nx_ - 1, static_cast<int>(std::floor((x.x() + k.support - spec_.window.x0) / h)));
  int jlo = std::max(0, static_cast<int>(std::ceil((x.y() - k.support - spec_.window.y0) / h)));
  int jhi = std::min(ny_ - 1, static_cast<int>(std::floor((x.y() + k.support - spec_.window.y0) / h)));
  double sum = 0;
  for (int j = jlo; j <= jhi; ++j)
    for (int i = ilo; i <= ihi; ++i) sum += k(grid_node(i, j) - x) * h * grid_value(i, j);
  return sum;
}

}  // namespace fpplab
