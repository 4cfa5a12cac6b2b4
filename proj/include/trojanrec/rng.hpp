#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace trojanrec {

// Seeded generator with platform-stable distributions. Boost's distributions
// are used instead of <random>'s because the latter are implementation defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::size_t uniform_index(std::size_t n) {
    boost::random::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
  }

  double uniform(double lo, double hi) {
    boost::random::uniform_real_distribution<double> dist(lo, hi);
    return dist(engine_);
  }

  double normal() {
    boost::random::normal_distribution<double> dist(0.0, 1.0);
    return dist(engine_);
  }

  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[uniform_index(i)]);
    }
  }

 private:
  boost::random::mt19937_64 engine_;
};

// Derives an independent child seed; used so that every seeded stage of a
// pipeline is reproducible on its own.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : tag) {
    h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  }
  return derive_seed(seed, h);
}

}  // namespace trojanrec
