// Copyright 2026 The gibbslearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GIBBSLEARN_RNG_HPP
#define GIBBSLEARN_RNG_HPP

#include "gibbslearn/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace gibbslearn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Substream seed for (master, index). Order-independent, so trials may run
/// in any order or in parallel.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// mt19937_64 plus hand-rolled transforms. The std distributions are
/// implementation-defined, which would break byte-identical replays across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  VectorXd normal_vector(Eigen::Index size) {
    VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = normal();
    return v;
  }

  VectorXd unit_vector(Eigen::Index size) {
    VectorXd v = normal_vector(size);
    while (v.norm() == 0.0) v = normal_vector(size);
    return v / v.norm();
  }

  VectorXd uniform_vector(Eigen::Index size, double lo, double hi) {
    VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = uniform(lo, hi);
    return v;
  }

  /// Complex Ginibre matrix with unit-variance entries.
  MatrixXc ginibre(Eigen::Index rows, Eigen::Index cols) {
    MatrixXc m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i)
        m(i, j) = Complex(normal(), normal()) * std::sqrt(0.5);
    return m;
  }

  MatrixXc hermitian(Eigen::Index dim) { return hermitian_part(ginibre(dim, dim)); }

  /// Haar-random unitary: QR of a Ginibre matrix with the phases of R fixed.
  MatrixXc unitary(Eigen::Index dim) {
    const MatrixXc z = ginibre(dim, dim);
    Eigen::HouseholderQR<MatrixXc> qr(z);
    MatrixXc q = qr.householderQ() * MatrixXc::Identity(dim, dim);
    const MatrixXc r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < dim; ++i) {
      const Complex d = r(i, i);
      const double mag = std::abs(d);
      q.col(i) *= mag > 0.0 ? d / mag : Complex(1.0);
    }
    return q;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Draws indices from a fixed discrete distribution by inverse CDF.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(std::span<const double> probabilities) {
    cumulative_.reserve(probabilities.size());
    double total = 0.0;
    for (double p : probabilities) {
      total += std::max(p, 0.0);
      cumulative_.push_back(total);
    }
    if (!(total > 0.0)) throw Error("categorical distribution has no mass");
    for (double& c : cumulative_) c /= total;
    cumulative_.back() = 1.0;
  }

  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                 static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace gibbslearn

#endif  // GIBBSLEARN_RNG_HPP
