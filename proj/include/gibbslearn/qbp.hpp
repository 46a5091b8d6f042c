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
 * @file qbp.hpp
 * Belief-propagation filter, exact derivatives of log Z and the filtered
 * direction operator.
 *
 * The filter is applied in the energy basis of H: an operator O becomes
 * sum_{jk} |j><k| O_jk ftilde(E_j - E_k), with
 *
 *     ftilde(w) = tanh(beta w / 2) / (beta w / 2),
 *
 * whose inverse Fourier transform is the time kernel
 *
 *     f(t) = (2 / (beta pi)) log((e^{pi|t|/beta} + 1) / (e^{pi|t|/beta} - 1)).
 *
 * The time kernel is only used to cross-check the pair by quadrature. Because
 * ftilde is even, the same transform produces both the derivative of
 * exp(-beta H(s)) and the filtered operator W~ whose variance lower-bounds
 * the Hessian quadratic form.
 */

#ifndef GIBBSLEARN_QBP_HPP
#define GIBBSLEARN_QBP_HPP

#include "gibbslearn/common.hpp"
#include "gibbslearn/gibbs.hpp"
#include "gibbslearn/lattice.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace gibbslearn {

struct FilterKernel {
  double beta = 1.0;
};

/// Below |beta w| = 1e-6 the two-term Taylor series 1 - (beta w)^2 / 12.
inline double f_tilde(double omega, const FilterKernel& kernel) {
  const double bw = kernel.beta * omega;
  if (std::abs(bw) < 1e-6) return 1.0 - bw * bw / 12.0;
  const double half = 0.5 * bw;
  return std::tanh(half) / half;
}

inline double f_time(double t, const FilterKernel& kernel) {
  if (!(kernel.beta > 0.0)) throw Error("time kernel requires beta > 0");
  if (t == 0.0) throw Error("kernel singular at origin");
  const double x = std::numbers::pi * std::abs(t) / kernel.beta;
  // log((e^x + 1) / (e^x - 1)) = log1p(2 / expm1(x))
  return 2.0 / (kernel.beta * std::numbers::pi) * std::log1p(2.0 / std::expm1(x));
}

struct QuadratureConfig {
  double truncation = 40.0;  // T
  double step = 1e-3;        // h
  double inner = 0.05;       // eps: [0, eps] is integrated semi-analytically
  double tolerance = 1e-6;   // allowed |S_h - S_2h|
};

struct FourierPoint {
  double omega = 0.0;
  double quadrature = 0.0;
  double closed_form = 0.0;
  double error = 0.0;
  double refinement_gap = 0.0;
};

struct FourierCheck {
  double beta = 0.0;
  double max_error = 0.0;
  double max_refinement_gap = 0.0;
  std::vector<FourierPoint> points;
};

namespace detail {

/// int_0^eps (-log t) cos(w t) dt from the cosine series.
inline double log_cosine_integral(double omega, double eps) {
  const double log_eps = std::log(eps);
  double sum = 0.0;
  double coeff = eps;  // (-1)^k w^{2k} eps^{2k+1} / (2k)!
  for (int k = 0; k < 200; ++k) {
    const double p = 2.0 * k + 1.0;
    const double term = coeff * (1.0 / (p * p) - log_eps / p);
    sum += term;
    if (std::abs(term) < 1e-19 && k > 2) break;
    coeff *= -(omega * eps) * (omega * eps) / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
  }
  return sum;
}

}  // namespace detail

/// int_{-T}^{T} f(t) e^{-i w t} dt. The log singularity on [0, eps] is split
/// as f(t) = -(2/(beta pi)) log t + g(t), with the log part integrated in
/// closed form and smooth g by Gauss-Legendre. [eps, T] uses composite
/// Simpson; the Simpson estimate at step 2h is returned as the error proxy.
inline std::pair<double, double> kernel_fourier_transform(double omega, const FilterKernel& kernel,
                                                          const QuadratureConfig& cfg) {
  const double scale = 2.0 / (kernel.beta * std::numbers::pi);
  const double eps = cfg.inner;

  auto smooth = [&](double t) { return f_time(t, kernel) + scale * std::log(t); };
  const double inner = scale * detail::log_cosine_integral(omega, eps) +
                       boost::math::quadrature::gauss<double, 30>::integrate(
                           [&](double t) { return smooth(t) * std::cos(omega * t); }, 0.0, eps);

  long intervals = static_cast<long>(std::ceil((cfg.truncation - eps) / cfg.step));
  if (intervals % 4 != 0) intervals += 4 - intervals % 4;
  const double h = (cfg.truncation - eps) / static_cast<double>(intervals);
  double fine = 0.0;
  double coarse = 0.0;
  for (long k = 0; k <= intervals; ++k) {
    const double t = eps + h * static_cast<double>(k);
    const double value = f_time(t, kernel) * std::cos(omega * t);
    const double wf = (k == 0 || k == intervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    fine += wf * value;
    if (k % 2 == 0) {
      const long kk = k / 2;
      const double wc = (kk == 0 || k == intervals) ? 1.0 : (kk % 2 ? 4.0 : 2.0);
      coarse += wc * value;
    }
  }
  fine *= h / 3.0;
  coarse *= 2.0 * h / 3.0;
  return {2.0 * (inner + fine), 2.0 * std::abs(fine - coarse)};
}

inline FourierCheck verify_fourier_pair(const FilterKernel& kernel,
                                        const std::vector<double>& omega_grid,
                                        const QuadratureConfig& cfg = {}) {
  if (!(kernel.beta > 0.0)) throw Error("Fourier check requires beta > 0");
  if (!(cfg.step > 0.0) || !(cfg.truncation > cfg.inner) || !(cfg.inner > 0.0))
    throw Error("invalid quadrature configuration");
  FourierCheck check;
  check.beta = kernel.beta;
  for (double omega : omega_grid) {
    const auto [value, gap] = kernel_fourier_transform(omega, kernel, cfg);
    if (gap > cfg.tolerance)
      throw Error("quadrature did not converge at omega=" + format_double(omega) +
                  " (refinement gap " + format_double(gap) + ")");
    FourierPoint pt{omega, value, f_tilde(omega, kernel), 0.0, gap};
    pt.error = std::abs(pt.quadrature - pt.closed_form);
    check.max_error = std::max(check.max_error, pt.error);
    check.max_refinement_gap = std::max(check.max_refinement_gap, gap);
    check.points.push_back(pt);
  }
  return check;
}

/// Energy-basis matrix F_jk = ftilde(E_j - E_k).
inline MatrixXd filter_matrix(const SpectralDecomposition& spec, double beta) {
  const FilterKernel kernel{beta};
  const Eigen::Index dim = spec.dim();
  MatrixXd f(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k)
    for (Eigen::Index j = 0; j < dim; ++j)
      f(j, k) = f_tilde(spec.energies(j) - spec.energies(k), kernel);
  return f;
}

/// Phi_H(O). Exact gaps of zero (including inside degenerate blocks) get
/// ftilde(0) = 1, so the result does not depend on the eigenvector choice
/// within a degenerate block.
inline MatrixXc qbp_transform(const MatrixXc& op, const SpectralDecomposition& spec, double beta) {
  if (op.rows() != spec.dim() || op.cols() != spec.dim()) throw Error("dimension mismatch");
  MatrixXc rotated = spec.to_energy_basis(op);
  rotated.array() *= filter_matrix(spec, beta).cast<Complex>().array();
  return hermitian_part(spec.from_energy_basis(rotated));
}

/// d/d lambda_l log Z = -beta Tr[E_l rho].
inline VectorXd grad_logZ(const OperatorBasis& basis, const VectorXd& lambda, double beta) {
  return -beta * marginals(basis, thermal_state(basis, lambda, beta));
}

inline VectorXd grad_logZ(const HamiltonianModel& model, double beta) {
  return grad_logZ(model.basis(), model.mu(), beta);
}

struct HessianReport {
  MatrixXd matrix;
  double min_eigenvalue = 0.0;
  double asymmetry = 0.0;  // max |M - M^T| before symmetrization
  VectorXd lambda;
  double beta = 0.0;
};

struct HessianOptions {
  double budget = 4e9;  // limit on m^2 * 2^n complex multiply-adds
};

/// Entry (j, k) = (beta^2 / 2) Tr[{E_j, Phi(E_k)} rho] - beta^2 e_j e_k,
/// assembled one column Phi(E_k) at a time in the energy basis.
inline HessianReport hessian_logZ(const OperatorBasis& basis, const VectorXd& lambda, double beta,
                                  const HessianOptions& options = {}) {
  const int n = basis.num_sites();
  const int m = basis.m();
  const double dim = static_cast<double>(hilbert_dim(n));
  const double cost = static_cast<double>(m) * m * dim * dim;
  if (cost > options.budget)
    throw Error("Hessian exceeds compute budget: m=" + std::to_string(m) + ", 2^n=" +
                format_double(dim) + " needs ~" + format_double(cost) +
                " operations; reduce n or kappa, or raise the budget");

  const GibbsEnsemble ens = thermal_state(basis, lambda, beta);
  const SpectralDecomposition& spec = ens.spec;
  const MatrixXd filter = filter_matrix(spec, beta);

  // Basis operators in the energy basis: U^dagger E_l U.
  std::vector<MatrixXc> rotated(m);
  VectorXd e(m);
  for (int l = 0; l < m; ++l) {
    rotated[l] = spec.vectors.adjoint() * pauli_left_multiply(basis.ops[l].pauli(n), spec.vectors);
    e(l) = (ens.weights.array() * rotated[l].diagonal().real().array()).sum();
  }

  // Tr[{A, C} rho] = sum_{ab} (r_a + r_b) A_ab C_ba in the energy basis.
  const Eigen::Index d = spec.dim();
  MatrixXd pair_weights(d, d);
  for (Eigen::Index b = 0; b < d; ++b)
    for (Eigen::Index a = 0; a < d; ++a) pair_weights(a, b) = ens.weights(a) + ens.weights(b);

  MatrixXd h(m, m);
  for (int k = 0; k < m; ++k) {
    const MatrixXc filtered = rotated[k].array() * filter.cast<Complex>().array();
    const MatrixXc weighted =
        (pair_weights.cast<Complex>().array() * filtered.transpose().array()).matrix();
    const MatrixXd weighted_t = weighted.real();
    const MatrixXd weighted_ti = weighted.imag();
    for (int j = 0; j < m; ++j) {
      const double anti = (rotated[j].real().array() * weighted_t.array()).sum() -
                          (rotated[j].imag().array() * weighted_ti.array()).sum();
      h(j, k) = 0.5 * beta * beta * anti - beta * beta * e(j) * e(k);
    }
  }

  HessianReport report;
  report.asymmetry = m > 0 ? (h - h.transpose()).cwiseAbs().maxCoeff() : 0.0;
  report.matrix = 0.5 * (h + h.transpose());
  report.min_eigenvalue =
      m > 0 ? Eigen::SelfAdjointEigenSolver<MatrixXd>(report.matrix, Eigen::EigenvaluesOnly)
                  .eigenvalues()(0)
            : 0.0;
  report.lambda = lambda;
  report.beta = beta;
  return report;
}

inline HessianReport hessian_logZ(const HamiltonianModel& model, double beta,
                                  const HessianOptions& options = {}) {
  return hessian_logZ(model.basis(), model.mu(), beta, options);
}

/// W~_v = Phi_{H(lambda)}(sum_l v_l E_l).
inline MatrixXc quasilocal_W(const VectorXd& v, const OperatorBasis& basis,
                             const VectorXd& lambda, double beta) {
  if (v.size() != basis.m()) throw Error("direction length does not match basis size");
  const SpectralDecomposition spec = diagonalize(assemble_operator(basis, lambda));
  return qbp_transform(assemble_operator(basis, v), spec, beta);
}

inline MatrixXc quasilocal_W(const VectorXd& v, const HamiltonianModel& model, double beta) {
  return quasilocal_W(v, model.basis(), model.mu(), beta);
}

inline nlohmann::json hessian_to_json(const HessianReport& report, bool include_matrix) {
  nlohmann::json j{{"lambda", std::vector<double>(report.lambda.begin(), report.lambda.end())},
                   {"beta", report.beta},
                   {"min_eig", report.min_eigenvalue},
                   {"asymmetry", report.asymmetry}};
  if (include_matrix) {
    std::vector<std::vector<double>> rows(report.matrix.rows());
    for (Eigen::Index i = 0; i < report.matrix.rows(); ++i)
      rows[i].assign(report.matrix.row(i).begin(), report.matrix.row(i).end());
    j["matrix"] = rows;
  }
  return j;
}

}  // namespace gibbslearn

#endif  // GIBBSLEARN_QBP_HPP
