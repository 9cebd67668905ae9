#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "alpha/matrix.hpp"

namespace alpha {

/// splitmix64 step, used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic sub-seed for (seed, rep, grid point) combinations.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t s = seed;
  (void)splitmix64(s);
  s ^= a * 0xd1342543de82ef95ULL;
  (void)splitmix64(s);
  s ^= b * 0xaf251af3b0f025b5ULL;
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  /// Category in [0, probs.size()) from a simplex of probabilities.
  Index categorical(const std::vector<double>& probs) {
    double u = uniform(), acc = 0.0;
    for (std::size_t s = 0; s < probs.size(); ++s) {
      acc += probs[s];
      if (u <= acc) return static_cast<Index>(s);
    }
    return static_cast<Index>(probs.size() - 1);
  }

  Matrix normal_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace alpha
