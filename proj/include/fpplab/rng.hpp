#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace fpplab::rng {

// splitmix64 step (Steele, Lea, Vigna).  Used both as a hash for deriving
// sub-stream seeds and as the per-cell generator.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based seed derivation: hash a root seed together with a list of
// stream identifiers.  Disjoint identifier tuples give independent streams.
inline std::uint64_t derive(std::uint64_t root, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = root;
  std::uint64_t h = splitmix64(s);
  for (std::uint64_t id : ids) {
    s = h ^ (id + 0x9e3779b97f4a7c15ULL);
    h = splitmix64(s);
  }
  return h;
}

class Stream {
 public:
  using result_type = std::uint64_t;
  explicit Stream(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }
  result_type operator()() { return splitmix64(state_); }

 private:
  std::uint64_t state_;
};

// Uniform in [0,1); 53 random bits.
inline double uniform(Stream& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(Stream& g, double a, double b) { return a + (b - a) * uniform(g); }

inline double exponential(Stream& g) { return -std::log1p(-uniform(g)); }

// One standard normal via Box-Muller (no state carried between calls).
inline double normal(Stream& g) {
  double u1 = 1.0 - uniform(g);
  double u2 = uniform(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Poisson by inversion (Knuth); fine for the small per-cell means used here.
inline int poisson(Stream& g, double lambda) {
  double limit = std::exp(-lambda);
  double prod = uniform(g);
  int k = 0;
  while (prod > limit) {
    prod *= uniform(g);
    ++k;
  }
  return k;
}

}  // namespace fpplab::rng
