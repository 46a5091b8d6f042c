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

/**
 * @file lattice.hpp
 * Lattices, the canonical kappa-local Pauli basis and dense Hamiltonians.
 *
 * Sites are numbered in row-major order over the lattice coordinates. In
 * dense matrices site i is the (n-1-i)-th bit of the computational basis
 * index, so operators are laid out as kron(P_0, P_1, ..., P_{n-1}).
 */

#ifndef GIBBSLEARN_LATTICE_HPP
#define GIBBSLEARN_LATTICE_HPP

#include "gibbslearn/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace gibbslearn {

inline constexpr int kDefaultDenseCap = 14;

/// Largest qubit count for which dense 2^n x 2^n matrices are built.
/// GIBBSLEARN_DENSE_CAP overrides the default.
inline int dense_cap() {
  if (const char* env = std::getenv("GIBBSLEARN_DENSE_CAP")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0 && value < 31)
      return static_cast<int>(value);
  }
  return kDefaultDenseCap;
}

inline void check_dense_cap(int num_sites) {
  if (num_sites > dense_cap())
    throw Error("dense dimension cap exceeded: n=" + std::to_string(num_sites) +
                " > cap " + std::to_string(dense_cap()));
}

inline Eigen::Index hilbert_dim(int num_sites) { return Eigen::Index{1} << num_sites; }

/// Bit of the computational basis index that carries site `site`.
inline std::uint64_t site_bit(int num_sites, int site) {
  return std::uint64_t{1} << (num_sites - 1 - site);
}

// --------------------------------------------------------------------------
// LatticeSpec
// --------------------------------------------------------------------------

struct LatticeSpec {
  std::vector<int> sides;
  bool periodic = false;
  int qudit_dim = 2;

  static LatticeSpec chain(int n, bool periodic = false) { return {{n}, periodic, 2}; }

  int dimension() const { return static_cast<int>(sides.size()); }

  int num_sites() const {
    return std::accumulate(sides.begin(), sides.end(), 1, std::multiplies<>());
  }

  void validate() const {
    if (sides.empty()) throw Error("lattice must have dimension >= 1");
    for (int s : sides)
      if (s < 1) throw Error("lattice side lengths must be positive");
    if (qudit_dim != 2) throw Error("only qubits (d = 2) are supported");
  }

  std::vector<int> coords(int site) const {
    std::vector<int> c(sides.size());
    for (int k = dimension() - 1; k >= 0; --k) {
      c[k] = site % sides[k];
      site /= sides[k];
    }
    return c;
  }

  /// Manhattan distance; each axis wraps when periodic.
  int distance(int a, int b) const {
    const auto ca = coords(a);
    const auto cb = coords(b);
    int total = 0;
    for (int k = 0; k < dimension(); ++k) {
      int d = std::abs(ca[k] - cb[k]);
      if (periodic) d = std::min(d, sides[k] - d);
      total += d;
    }
    return total;
  }

  /// Sites at distance <= r from `center`, ascending.
  std::vector<int> ball(int r, int center) const {
    std::vector<int> out;
    for (int s = 0; s < num_sites(); ++s)
      if (distance(s, center) <= r) out.push_back(s);
    return out;
  }

  int diameter(std::span<const int> sites) const {
    int d = 0;
    for (std::size_t i = 0; i < sites.size(); ++i)
      for (std::size_t j = i + 1; j < sites.size(); ++j)
        d = std::max(d, distance(sites[i], sites[j]));
    return d;
  }

  bool operator==(const LatticeSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const LatticeSpec& l) {
  j = nlohmann::json{{"dims", l.dimension()}, {"sides", l.sides}, {"periodic", l.periodic}};
}

inline void from_json(const nlohmann::json& j, LatticeSpec& l) {
  l.sides = j.at("sides").get<std::vector<int>>();
  l.periodic = j.value("periodic", false);
  l.qudit_dim = 2;
  if (j.contains("dims") && j.at("dims").get<int>() != l.dimension())
    throw Error("lattice.dims does not match the number of side lengths");
  l.validate();
}

// --------------------------------------------------------------------------
// Pauli strings
// --------------------------------------------------------------------------

enum class Pauli : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

inline char pauli_char(Pauli p) { return "IXYZ"[static_cast<int>(p)]; }

/// Bit-mask form of a Pauli string: P|b> = i^{#Y} (-1)^{|b & z|} |b ^ x>.
struct PauliString {
  int num_sites = 0;
  std::uint64_t x_mask = 0;
  std::uint64_t z_mask = 0;

  int y_count() const { return std::popcount(x_mask & z_mask); }

  Complex global_phase() const {
    static constexpr Complex kPhases[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return kPhases[y_count() % 4];
  }

  /// Coefficient c with P|b> = c |b ^ x_mask>.
  Complex coefficient(std::uint64_t b) const {
    const Complex phase = global_phase();
    return (std::popcount(b & z_mask) & 1) ? -phase : phase;
  }

  bool commutes_with(const PauliString& other) const {
    const int anti = std::popcount(x_mask & other.z_mask) + std::popcount(z_mask & other.x_mask);
    return anti % 2 == 0;
  }
};

/// Tr[P rho] for a dense operator rho (any square matrix of matching size).
inline Complex pauli_trace(const PauliString& p, const MatrixXc& rho) {
  Complex sum = 0.0;
  const std::uint64_t dim = static_cast<std::uint64_t>(rho.rows());
  for (std::uint64_t a = 0; a < dim; ++a)
    sum += p.coefficient(a) * rho(static_cast<Eigen::Index>(a),
                                  static_cast<Eigen::Index>(a ^ p.x_mask));
  return sum;
}

/// P * M without forming P.
inline MatrixXc pauli_left_multiply(const PauliString& p, const MatrixXc& m) {
  MatrixXc out(m.rows(), m.cols());
  const std::uint64_t dim = static_cast<std::uint64_t>(m.rows());
  for (std::uint64_t b = 0; b < dim; ++b)
    out.row(static_cast<Eigen::Index>(b ^ p.x_mask)) =
        p.coefficient(b) * m.row(static_cast<Eigen::Index>(b));
  return out;
}

// --------------------------------------------------------------------------
// Basis operators
// --------------------------------------------------------------------------

/// One element E_l of the canonical basis: a Pauli string with non-identity
/// letters exactly on `support`.
struct LocalBasisOp {
  std::vector<int> support;
  std::vector<Pauli> letters;
  int index = 0;

  PauliString pauli(int num_sites) const {
    PauliString p{num_sites, 0, 0};
    for (std::size_t k = 0; k < support.size(); ++k) {
      const std::uint64_t bit = site_bit(num_sites, support[k]);
      if (letters[k] == Pauli::X || letters[k] == Pauli::Y) p.x_mask |= bit;
      if (letters[k] == Pauli::Z || letters[k] == Pauli::Y) p.z_mask |= bit;
    }
    return p;
  }

  bool acts_on(int site) const {
    return std::find(support.begin(), support.end(), site) != support.end();
  }

  /// e.g. "X0 Z1".
  std::string label() const {
    std::string s;
    for (std::size_t k = 0; k < support.size(); ++k) {
      if (k) s += ' ';
      s += pauli_char(letters[k]);
      s += std::to_string(support[k]);
    }
    return s;
  }

  bool operator==(const LocalBasisOp&) const = default;
};

struct OperatorBasis {
  LatticeSpec lattice;
  int kappa = 1;
  std::vector<LocalBasisOp> ops;

  int m() const { return static_cast<int>(ops.size()); }
  int num_sites() const { return lattice.num_sites(); }
};

/// All Pauli strings of weight 1..kappa whose support has Manhattan diameter
/// at most kappa - 1. Order: by weight, then lexicographic support, then
/// letters (X < Y < Z, first support site most significant).
inline OperatorBasis enumerate_basis(const LatticeSpec& lattice, int kappa) {
  lattice.validate();
  if (kappa < 1) throw Error("locality must be >= 1");
  const int n = lattice.num_sites();
  if (kappa > n) throw Error("locality exceeds system size");

  OperatorBasis basis{lattice, kappa, {}};
  for (int weight = 1; weight <= kappa; ++weight) {
    std::vector<int> support(weight);
    std::iota(support.begin(), support.end(), 0);
    while (true) {
      if (lattice.diameter(support) <= kappa - 1) {
        const int combos = static_cast<int>(std::pow(3, weight));
        for (int code = 0; code < combos; ++code) {
          LocalBasisOp op;
          op.support = support;
          op.letters.resize(weight);
          int rest = code;
          for (int k = weight - 1; k >= 0; --k) {
            op.letters[k] = static_cast<Pauli>(1 + rest % 3);
            rest /= 3;
          }
          op.index = basis.m();
          basis.ops.push_back(std::move(op));
        }
      }
      // next combination
      int k = weight - 1;
      while (k >= 0 && support[k] == n - weight + k) --k;
      if (k < 0) break;
      ++support[k];
      for (int j = k + 1; j < weight; ++j) support[j] = support[j - 1] + 1;
    }
  }
  return basis;
}

inline MatrixXc to_dense(const PauliString& p) {
  check_dense_cap(p.num_sites);
  const Eigen::Index dim = hilbert_dim(p.num_sites);
  MatrixXc out = MatrixXc::Zero(dim, dim);
  for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(dim); ++b)
    out(static_cast<Eigen::Index>(b ^ p.x_mask), static_cast<Eigen::Index>(b)) = p.coefficient(b);
  return out;
}

inline MatrixXc to_dense(const LocalBasisOp& op, const LatticeSpec& lattice) {
  for (int s : op.support)
    if (s < 0 || s >= lattice.num_sites()) throw Error("operator support outside lattice");
  return to_dense(op.pauli(lattice.num_sites()));
}

/// Sum_l coeffs_l E_l with no bound on the coefficients.
inline MatrixXc assemble_operator(const OperatorBasis& basis, const VectorXd& coeffs) {
  if (coeffs.size() != basis.m())
    throw Error("coefficient length " + std::to_string(coeffs.size()) +
                " does not match basis size " + std::to_string(basis.m()));
  const int n = basis.num_sites();
  check_dense_cap(n);
  const Eigen::Index dim = hilbert_dim(n);
  MatrixXc out = MatrixXc::Zero(dim, dim);
  for (int l = 0; l < basis.m(); ++l) {
    if (coeffs(l) == 0.0) continue;
    const PauliString p = basis.ops[l].pauli(n);
    for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(dim); ++b)
      out(static_cast<Eigen::Index>(b ^ p.x_mask), static_cast<Eigen::Index>(b)) +=
          coeffs(l) * p.coefficient(b);
  }
  return out;
}

/// mu_l = Tr[E_l O] / 2^n.
inline VectorXd recover_coefficients(const OperatorBasis& basis, const MatrixXc& op) {
  const int n = basis.num_sites();
  const double dim = static_cast<double>(hilbert_dim(n));
  VectorXd mu(basis.m());
  for (int l = 0; l < basis.m(); ++l)
    mu(l) = pauli_trace(basis.ops[l].pauli(n), op).real() / dim;
  return mu;
}

// --------------------------------------------------------------------------
// HamiltonianModel
// --------------------------------------------------------------------------

/// H(mu) = sum_l mu_l E_l with max_l |mu_l| <= 1.
class HamiltonianModel {
 public:
  HamiltonianModel(std::shared_ptr<const OperatorBasis> basis, VectorXd mu)
      : basis_(std::move(basis)), mu_(std::move(mu)) {
    if (!basis_) throw Error("model requires a basis");
    if (mu_.size() != basis_->m())
      throw Error("coefficient length " + std::to_string(mu_.size()) +
                  " does not match basis size " + std::to_string(basis_->m()));
    for (Eigen::Index l = 0; l < mu_.size(); ++l)
      if (!std::isfinite(mu_(l)) || std::abs(mu_(l)) > 1.0)
        throw Error("coefficient mu[" + std::to_string(l) + "] = " + format_double(mu_(l)) +
                    " outside [-1, 1]");
  }

  const OperatorBasis& basis() const { return *basis_; }
  const std::shared_ptr<const OperatorBasis>& basis_ptr() const { return basis_; }
  const VectorXd& mu() const { return mu_; }
  int m() const { return basis_->m(); }
  int num_sites() const { return basis_->num_sites(); }

 private:
  std::shared_ptr<const OperatorBasis> basis_;
  VectorXd mu_;
};

inline MatrixXc assemble_hamiltonian(const HamiltonianModel& model) {
  return assemble_operator(model.basis(), model.mu());
}

inline nlohmann::json model_to_json(const HamiltonianModel& model) {
  return nlohmann::json{{"lattice", model.basis().lattice},
                        {"kappa", model.basis().kappa},
                        {"mu", std::vector<double>(model.mu().begin(), model.mu().end())}};
}

inline HamiltonianModel model_from_json(const nlohmann::json& j) {
  const auto lattice = j.at("lattice").get<LatticeSpec>();
  const int kappa = j.at("kappa").get<int>();
  auto basis = std::make_shared<const OperatorBasis>(enumerate_basis(lattice, kappa));
  const auto mu = j.at("mu").get<std::vector<double>>();
  return HamiltonianModel(basis, Eigen::Map<const VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size())));
}

}  // namespace gibbslearn

#endif  // GIBBSLEARN_LATTICE_HPP
