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
 * @file gibbs.hpp
 * Exact thermal states by full diagonalization.
 *
 * Everything downstream (gradients, Hessians, sampling, the lab checks)
 * reads its physics from a GibbsEnsemble built here.
 */

#ifndef GIBBSLEARN_GIBBS_HPP
#define GIBBSLEARN_GIBBS_HPP

#include "gibbslearn/common.hpp"
#include "gibbslearn/lattice.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace gibbslearn {

inline constexpr double kHermitianTolerance = 1e-8;
inline constexpr double kVarianceClamp = 1e-10;

/// H = U diag(energies) U^dagger, energies ascending.
struct SpectralDecomposition {
  VectorXd energies;
  MatrixXc vectors;

  Eigen::Index dim() const { return energies.size(); }

  MatrixXc reconstruct() const {
    return vectors * energies.cast<Complex>().asDiagonal() * vectors.adjoint();
  }

  /// U^dagger O U.
  MatrixXc to_energy_basis(const MatrixXc& op) const { return vectors.adjoint() * op * vectors; }
  MatrixXc from_energy_basis(const MatrixXc& op) const { return vectors * op * vectors.adjoint(); }
};

inline SpectralDecomposition diagonalize(const MatrixXc& h) {
  if (h.rows() != h.cols()) throw Error("matrix is not square");
  const double scale = std::max(1.0, max_abs(h));
  if (!is_hermitian(h, kHermitianTolerance * scale)) throw Error("matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixXc> solver(hermitian_part(h));
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

struct GibbsEnsemble {
  SpectralDecomposition spec;
  double beta = 0.0;
  double log_z = 0.0;
  VectorXd weights;  // r_j = exp(-beta E_j - log Z)

  Eigen::Index dim() const { return spec.dim(); }

  /// rho = sum_j r_j |j><j|.
  MatrixXc density() const {
    return spec.vectors * weights.cast<Complex>().asDiagonal() * spec.vectors.adjoint();
  }

  /// sqrt(rho), used by the spectral-concentration checks.
  MatrixXc sqrt_density() const {
    return spec.vectors * weights.cwiseSqrt().cast<Complex>().asDiagonal() *
           spec.vectors.adjoint();
  }

  double purity() const { return weights.squaredNorm(); }
};

/// Weights use the shift exp(-beta (E_j - E_min)), so log Z stays finite for
/// large beta.
inline GibbsEnsemble gibbs(SpectralDecomposition spec, double beta) {
  if (!std::isfinite(beta)) throw Error("inverse temperature must be finite");
  if (beta < 0.0) throw Error("negative inverse temperature");
  const Eigen::Index dim = spec.dim();
  if (dim == 0) throw Error("empty spectrum");

  const double e_min = spec.energies.minCoeff();
  VectorXd w(dim);
  for (Eigen::Index j = 0; j < dim; ++j) w(j) = std::exp(-beta * (spec.energies(j) - e_min));
  const double total = w.sum();
  GibbsEnsemble ens;
  ens.beta = beta;
  ens.log_z = -beta * e_min + std::log(total);
  ens.weights = w / total;
  ens.spec = std::move(spec);
  return ens;
}

inline GibbsEnsemble thermal_state(const OperatorBasis& basis, const VectorXd& coeffs,
                                   double beta) {
  return gibbs(diagonalize(assemble_operator(basis, coeffs)), beta);
}

inline GibbsEnsemble thermal_state(const HamiltonianModel& model, double beta) {
  return thermal_state(model.basis(), model.mu(), beta);
}

inline double log_partition(const OperatorBasis& basis, const VectorXd& coeffs, double beta) {
  return thermal_state(basis, coeffs, beta).log_z;
}

/// <E> = sum_j r_j <j|E|j>.
inline double marginal(const LocalBasisOp& op, const GibbsEnsemble& ens) {
  const int n = std::countr_zero(static_cast<std::uint64_t>(ens.dim()));
  if (hilbert_dim(n) != ens.dim()) throw Error("ensemble dimension is not a power of two");
  for (int s : op.support)
    if (s < 0 || s >= n) throw Error("operator support outside the ensemble's qubits");
  const PauliString p = op.pauli(n);
  double total = 0.0;
  for (Eigen::Index j = 0; j < ens.dim(); ++j) {
    if (ens.weights(j) == 0.0) continue;
    const auto v = ens.spec.vectors.col(j);
    Complex diag = 0.0;
    for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(ens.dim()); ++b)
      diag += std::conj(v(static_cast<Eigen::Index>(b ^ p.x_mask))) * p.coefficient(b) *
              v(static_cast<Eigen::Index>(b));
    total += ens.weights(j) * diag.real();
  }
  return total;
}

/// All marginals e_l = Tr[rho E_l] of a basis; builds rho once.
inline VectorXd marginals(const OperatorBasis& basis, const GibbsEnsemble& ens) {
  const int n = basis.num_sites();
  if (hilbert_dim(n) != ens.dim()) throw Error("basis and ensemble dimensions differ");
  const MatrixXc rho = ens.density();
  VectorXd e(basis.m());
  for (int l = 0; l < basis.m(); ++l) e(l) = pauli_trace(basis.ops[l].pauli(n), rho).real();
  return e;
}

inline double expectation(const MatrixXc& op, const GibbsEnsemble& ens) {
  if (op.rows() != ens.dim() || op.cols() != ens.dim()) throw Error("dimension mismatch");
  const MatrixXc rotated = ens.spec.to_energy_basis(op);
  return (ens.weights.array() * rotated.diagonal().real().array()).sum();
}

/// Tr[O^2 rho] - Tr[O rho]^2, clamped to 0 when it is negative by less than
/// 1e-10.
inline double variance(const MatrixXc& op, const GibbsEnsemble& ens) {
  if (op.rows() != ens.dim() || op.cols() != ens.dim()) throw Error("dimension mismatch");
  const MatrixXc rotated = ens.spec.to_energy_basis(op);
  double second = 0.0;
  double first = 0.0;
  for (Eigen::Index j = 0; j < ens.dim(); ++j) {
    second += ens.weights(j) * rotated.col(j).squaredNorm();
    first += ens.weights(j) * rotated(j, j).real();
  }
  const double var = second - first * first;
  return (var < 0.0 && var > -kVarianceClamp) ? 0.0 : var;
}

}  // namespace gibbslearn

#endif  // GIBBSLEARN_GIBBS_HPP
