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
 * @file lab.hpp
 * Numerical checks of structural inequalities around the log-partition
 * function: Hessian versus filtered variance, local reductions, spectral
 * concentration, operator spreading, series bounds and a product-state
 * lower-bound family.
 *
 * Every check fills a CheckReport. Rows carry the inputs, both sides of the
 * inequality and the slack; rows recorded as probes are reported but do not
 * affect `pass`.
 */

#ifndef GIBBSLEARN_LAB_HPP
#define GIBBSLEARN_LAB_HPP

#include "gibbslearn/common.hpp"
#include "gibbslearn/gibbs.hpp"
#include "gibbslearn/lattice.hpp"
#include "gibbslearn/qbp.hpp"
#include "gibbslearn/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace gibbslearn {

// ---------------------------------------------------------------------------
// Reports

struct CheckReport {
  std::string check;
  std::vector<std::string> columns;  // input columns; lhs, rhs, slack are appended
  std::vector<std::vector<double>> rows;
  bool pass = true;
  double min_slack = std::numeric_limits<double>::infinity();
  nlohmann::json grid = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();

  CheckReport() = default;
  CheckReport(std::string name, std::vector<std::string> cols)
      : check(std::move(name)), columns(std::move(cols)) {}

  /// Asserted row: fails the report when slack < floor.
  void assert_row(std::vector<double> inputs, double lhs, double rhs, double slack, double floor) {
    if (!(slack >= floor)) pass = false;
    min_slack = std::min(min_slack, slack);
    push(std::move(inputs), lhs, rhs, slack);
  }

  /// Probe row: recorded only.
  void probe_row(std::vector<double> inputs, double lhs, double rhs, double slack) {
    push(std::move(inputs), lhs, rhs, slack);
  }

  void fail() { pass = false; }

  /// Concatenates reports of one check, prefixing each row with its part
  /// index.
  static CheckReport merge(const std::vector<CheckReport>& parts) {
    if (parts.empty()) throw Error("nothing to merge");
    CheckReport out(parts.front().check, parts.front().columns);
    out.columns.insert(out.columns.begin(), "part");
    out.grid = nlohmann::json::array();
    nlohmann::json extras = nlohmann::json::array();
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto& p = parts[k];
      if (p.columns != parts.front().columns) throw Error("merged reports differ in columns");
      out.pass = out.pass && p.pass;
      out.min_slack = std::min(out.min_slack, p.min_slack);
      out.grid.push_back(p.grid);
      if (!p.extra.empty()) extras.push_back(p.extra);
      for (auto row : p.rows) {
        row.insert(row.begin(), static_cast<double>(k));
        out.rows.push_back(std::move(row));
      }
    }
    if (!extras.empty()) out.extra = {{"parts", extras}};
    return out;
  }

  void write_csv(std::ostream& out) const {
    for (const auto& c : columns) out << c << ',';
    out << "lhs,rhs,slack\n";
    for (const auto& row : rows) {
      for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_double(row[k]);
      out << '\n';
    }
  }

  nlohmann::json summary() const {
    nlohmann::json j{{"check", check}, {"pass", pass}, {"grid", grid}, {"rows", rows.size()}};
    j["min_slack"] = std::isfinite(min_slack) ? nlohmann::json(min_slack) : nlohmann::json(nullptr);
    if (!extra.empty()) j["extra"] = extra;
    return j;
  }

 private:
  void push(std::vector<double> inputs, double lhs, double rhs, double slack) {
    if (inputs.size() != columns.size()) throw Error("report row does not match its columns");
    inputs.push_back(lhs);
    inputs.push_back(rhs);
    inputs.push_back(slack);
    rows.push_back(std::move(inputs));
  }
};

// ---------------------------------------------------------------------------
// Qubit operator helpers

/// Number of qubits of a square 2^n matrix.
inline int qubit_count(const MatrixXc& op) {
  if (op.rows() != op.cols() || op.rows() == 0) throw Error("operator is not square");
  const auto dim = static_cast<std::uint64_t>(op.rows());
  if ((dim & (dim - 1)) != 0) throw Error("operator dimension is not a power of two");
  return std::countr_zero(dim);
}

/// Tr_i[O] (x) I_i / 2.
inline MatrixXc replace_with_identity(const MatrixXc& op, int site) {
  const int n = qubit_count(op);
  if (site < 0 || site >= n) throw Error("site outside the operator's qubits");
  const std::uint64_t bit = site_bit(n, site);
  const Eigen::Index dim = op.rows();
  MatrixXc out = MatrixXc::Zero(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    const auto cu = static_cast<std::uint64_t>(c);
    if (cu & bit) continue;
    for (Eigen::Index r = 0; r < dim; ++r) {
      const auto ru = static_cast<std::uint64_t>(r);
      if (ru & bit) continue;
      const Complex half =
          0.5 * (op(r, c) + op(static_cast<Eigen::Index>(ru | bit), static_cast<Eigen::Index>(cu | bit)));
      out(r, c) = half;
      out(static_cast<Eigen::Index>(ru | bit), static_cast<Eigen::Index>(cu | bit)) = half;
    }
  }
  return out;
}

/// Traces out every listed site and re-tensors with identities.
inline MatrixXc replace_sites_with_identity(MatrixXc op, const std::vector<int>& sites) {
  for (int s : sites) op = replace_with_identity(op, s);
  return op;
}

/// Embeds a 2^k operator acting on `sites` (first site most significant).
inline MatrixXc embed_operator(const MatrixXc& local, const std::vector<int>& sites, int num_sites) {
  const auto k = static_cast<int>(sites.size());
  if (local.rows() != hilbert_dim(k) || local.cols() != hilbert_dim(k))
    throw Error("local operator does not match its support");
  std::uint64_t mask = 0;
  for (int s : sites) {
    if (s < 0 || s >= num_sites) throw Error("support outside the lattice");
    if (mask & site_bit(num_sites, s)) throw Error("repeated site in support");
    mask |= site_bit(num_sites, s);
  }
  auto local_index = [&](std::uint64_t b) {
    std::uint64_t idx = 0;
    for (int s : sites) idx = (idx << 1) | ((b & site_bit(num_sites, s)) ? 1 : 0);
    return static_cast<Eigen::Index>(idx);
  };
  const Eigen::Index dim = hilbert_dim(num_sites);
  MatrixXc out = MatrixXc::Zero(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c)
    for (Eigen::Index r = 0; r < dim; ++r) {
      const auto ru = static_cast<std::uint64_t>(r);
      const auto cu = static_cast<std::uint64_t>(c);
      if ((ru & ~mask) != (cu & ~mask)) continue;
      out(r, c) = local(local_index(ru), local_index(cu));
    }
  return out;
}

/// O - Tr[O] I / d.
inline MatrixXc traceless_part(const MatrixXc& op) {
  const Complex mean = op.trace() / static_cast<double>(op.rows());
  return op - mean * MatrixXc::Identity(op.rows(), op.cols());
}

// ---------------------------------------------------------------------------
// Direction vectors

struct DirectionVector {
  VectorXd v;
  bool normalized = false;

  static DirectionVector unit(VectorXd raw) {
    const double norm = raw.norm();
    if (!(norm > 0.0)) throw Error("direction vector is zero");
    return {raw / norm, true};
  }
};

// ---------------------------------------------------------------------------
// Hessian versus filtered variance

struct StrongConvexityProbe {
  CheckReport report;
  double min_q_times_m = std::numeric_limits<double>::infinity();
  double hessian_min_eigenvalue = 0.0;
};

/// For random unit v: q(v) = v^T Hess v against beta^2 Var_rho[W~_v].
/// Asserts q(v) >= beta^2 Var[W~_v] - 1e-8 and records min_v q(v) m.
inline StrongConvexityProbe strong_convexity_probe(const OperatorBasis& basis, const VectorXd& lambda,
                                                   double beta, int trials, std::uint64_t seed) {
  const int m = basis.m();
  const HessianReport hess = hessian_logZ(basis, lambda, beta);
  const GibbsEnsemble ens = thermal_state(basis, lambda, beta);
  Rng rng(seed);

  StrongConvexityProbe out;
  out.report = CheckReport("strong-convexity", {"trial", "beta", "q_times_m"});
  out.report.grid = {{"beta", beta}, {"m", m}, {"trials", trials}, {"seed", seed}};
  out.hessian_min_eigenvalue = hess.min_eigenvalue;
  for (int t = 0; t < trials; ++t) {
    const VectorXd v = rng.unit_vector(m);
    const double q = v.dot(hess.matrix * v);
    const MatrixXc w = qbp_transform(assemble_operator(basis, v), ens.spec, beta);
    const double var = beta * beta * variance(w, ens);
    out.min_q_times_m = std::min(out.min_q_times_m, q * m);
    out.report.assert_row({static_cast<double>(t), beta, q * m}, q, var, q - var, -1e-8);
  }
  out.report.extra = {{"min_q_times_m", out.min_q_times_m},
                      {"hessian_min_eigenvalue", hess.min_eigenvalue}};
  return out;
}

// ---------------------------------------------------------------------------
// Infinite-temperature variance

struct VarianceEnvelope {
  double lhs = 0.0;       // Var_eta[W~_v]
  double envelope = 0.0;  // sum v^2 / (beta log m + 1)^2
  double ratio = 0.0;
};

inline constexpr double kInfiniteTempRatioFloor = 0.01;

/// W~_v uses H(lambda); the variance is taken in the maximally mixed state:
/// ||W~_v||_F^2 / 2^n (W~_v is traceless).
inline VarianceEnvelope infinite_temp_variance(const OperatorBasis& basis, const VectorXd& lambda,
                                               double beta, const VectorXd& v) {
  const MatrixXc w = quasilocal_W(v, basis, lambda, beta);
  VarianceEnvelope out;
  out.lhs = frobenius_norm_sq(w) / static_cast<double>(w.rows());
  const double denom = beta * std::log(static_cast<double>(basis.m())) + 1.0;
  out.envelope = v.squaredNorm() / (denom * denom);
  out.ratio = out.envelope > 0.0 ? out.lhs / out.envelope : 0.0;
  return out;
}

inline CheckReport infinite_temp_variance_check(const OperatorBasis& basis, const VectorXd& lambda,
                                                double beta, int trials, std::uint64_t seed,
                                                double ratio_floor = kInfiniteTempRatioFloor) {
  CheckReport report("infinite-temp", {"trial", "beta", "ratio"});
  report.grid = {{"beta", beta}, {"m", basis.m()}, {"trials", trials}, {"ratio_floor", ratio_floor}};
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    const auto r = infinite_temp_variance(basis, lambda, beta, rng.unit_vector(basis.m()));
    report.assert_row({static_cast<double>(t), beta, r.ratio}, r.lhs, r.envelope,
                      r.ratio - ratio_floor, 0.0);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Local reductions

struct LocalReduction {
  MatrixXc source;
  int site = 0;
  MatrixXc reduced;  // O - Tr_i[O] (x) I_i / 2
};

inline LocalReduction local_reduce(const MatrixXc& op, int site) {
  return {op, site, op - replace_with_identity(op, site)};
}

struct GlobalToLocalMargins {
  double norm_sq = 0.0;         // ||O||_F^2 of the traceless part
  double sum_local = 0.0;       // sum_i ||O_(i)||_F^2
  double max_local = 0.0;       // max_i ||O_(i)||_F^2
  double sum_slack = 0.0;       // sum_local - norm_sq
  double max_slack = 0.0;       // max_local - norm_sq / |Z|
  bool pass = true;
};

/// The identity component carries no site information and is removed first.
inline GlobalToLocalMargins global_to_local_check(const MatrixXc& op, const std::vector<int>& sites) {
  if (sites.empty()) throw Error("site set is empty");
  const int n = qubit_count(op);
  std::vector<int> outside;
  for (int s = 0; s < n; ++s)
    if (std::find(sites.begin(), sites.end(), s) == sites.end()) outside.push_back(s);
  const MatrixXc o = traceless_part(op);
  const double scale = std::max(1.0, max_abs(o));
  if (max_abs(o - replace_sites_with_identity(o, outside)) > 1e-10 * scale)
    throw Error("operator is not supported in the given site set");

  GlobalToLocalMargins g;
  g.norm_sq = frobenius_norm_sq(o);
  for (int s : sites) {
    const double local = frobenius_norm_sq(local_reduce(o, s).reduced);
    g.sum_local += local;
    g.max_local = std::max(g.max_local, local);
  }
  g.sum_slack = g.sum_local - g.norm_sq;
  g.max_slack = g.max_local - g.norm_sq / static_cast<double>(sites.size());
  const double tol = -1e-10 * g.norm_sq;
  g.pass = g.sum_slack >= tol && g.max_slack >= tol;
  return g;
}

inline CheckReport global_to_local_suite(int num_sites, int trials, std::uint64_t seed) {
  CheckReport report("global-to-local", {"trial", "inequality"});
  report.grid = {{"n", num_sites}, {"trials", trials}, {"seed", seed}};
  std::vector<int> sites(num_sites);
  for (int s = 0; s < num_sites; ++s) sites[s] = s;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, t));
    const auto g = global_to_local_check(rng.hermitian(hilbert_dim(num_sites)), sites);
    const double floor = -1e-10 * g.norm_sq;
    report.assert_row({static_cast<double>(t), 1.0}, g.sum_local, g.norm_sq, g.sum_slack, floor);
    report.assert_row({static_cast<double>(t), 2.0}, g.max_local, g.norm_sq / num_sites, g.max_slack,
                      floor);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Local variance floor

struct LocalVarianceFloor {
  std::vector<double> per_site;  // Tr[(W~_(i))^2 eta]
  double lhs = 0.0;              // max over sites
  double envelope = 0.0;         // max_l v_l^2 / (beta log beta + 1)^(2D + 2)
  double ratio = 0.0;
};

inline LocalVarianceFloor local_variance_floor(const OperatorBasis& basis, const VectorXd& lambda,
                                               double beta, const VectorXd& v) {
  const MatrixXc w = quasilocal_W(v, basis, lambda, beta);
  const auto dim = static_cast<double>(w.rows());
  LocalVarianceFloor out;
  for (int i = 0; i < basis.num_sites(); ++i) {
    out.per_site.push_back(frobenius_norm_sq(local_reduce(w, i).reduced) / dim);
    out.lhs = std::max(out.lhs, out.per_site.back());
  }
  const double blogb = beta > 0.0 ? beta * std::log(beta) : 0.0;
  const int d = basis.lattice.dimension();
  out.envelope = v.cwiseAbs2().maxCoeff() / std::pow(blogb + 1.0, 2 * d + 2);
  out.ratio = out.envelope > 0.0 ? out.lhs / out.envelope : 0.0;
  return out;
}

inline CheckReport local_variance_suite(const OperatorBasis& basis, const VectorXd& lambda, double beta,
                                        int trials, std::uint64_t seed) {
  CheckReport report("local-variance", {"trial", "beta", "ratio"});
  report.grid = {{"beta", beta}, {"m", basis.m()}, {"trials", trials}, {"seed", seed}};
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    const auto r = local_variance_floor(basis, lambda, beta, rng.unit_vector(basis.m()));
    // positivity is asserted; the ratio itself is a probe
    report.assert_row({static_cast<double>(t), beta, r.ratio}, r.lhs, r.envelope, r.lhs, 1e-300);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Spectral concentration of local Hamiltonians

/// A Hamiltonian term: local matrix on an ordered support.
struct LocalTerm {
  std::vector<int> support;
  MatrixXc matrix;
};

struct LocalHamiltonian {
  int num_sites = 0;
  std::vector<LocalTerm> terms;

  MatrixXc dense() const {
    check_dense_cap(num_sites);
    const Eigen::Index dim = hilbert_dim(num_sites);
    MatrixXc h = MatrixXc::Zero(dim, dim);
    for (const auto& t : terms) h += embed_operator(t.matrix, t.support, num_sites);
    return h;
  }

  /// g: the largest number of terms touching one site.
  int interaction_degree() const {
    std::vector<int> count(num_sites, 0);
    for (const auto& t : terms)
      for (int s : t.support) ++count[s];
    return count.empty() ? 0 : *std::max_element(count.begin(), count.end());
  }

  int locality() const {
    std::size_t k = 0;
    for (const auto& t : terms) k = std::max(k, t.support.size());
    return static_cast<int>(k);
  }

  double max_term_norm() const {
    double norm = 0.0;
    for (const auto& t : terms) norm = std::max(norm, operator_norm(t.matrix));
    return norm;
  }
};

/// Nearest-neighbour chain with one random Hermitian term per bond, each
/// scaled to unit operator norm.
inline LocalHamiltonian random_chain_hamiltonian(int num_sites, Rng& rng) {
  LocalHamiltonian h;
  h.num_sites = num_sites;
  for (int i = 0; i + 1 < num_sites; ++i) {
    MatrixXc t = rng.hermitian(4);
    t /= operator_norm(t);
    h.terms.push_back({{i, i + 1}, t});
  }
  return h;
}

struct AklPoint {
  double lhs = 0.0;    // ||P_{>=y} O P_{<=x}||
  double bound = 0.0;  // ||O|| exp(-(y - x - 2 g |X|) / (2 g kappa))
};

/// Spectral data reused across many (x, y) evaluations.
struct AklContext {
  SpectralDecomposition spec;
  int g = 0;
  int kappa = 0;

  explicit AklContext(const LocalHamiltonian& h)
      : spec(diagonalize(h.dense())), g(h.interaction_degree()), kappa(h.locality()) {
    if (h.max_term_norm() > 1.0 + 1e-12) throw Error("Hamiltonian terms must have norm at most 1");
  }

  AklPoint evaluate(const LocalTerm& o_x, double x, double y) const {
    const int n = std::countr_zero(static_cast<std::uint64_t>(spec.dim()));
    const MatrixXc rotated = spec.to_energy_basis(embed_operator(o_x.matrix, o_x.support, n));
    std::vector<Eigen::Index> rows;
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < spec.dim(); ++j) {
      if (spec.energies(j) >= y) rows.push_back(j);
      if (spec.energies(j) <= x) cols.push_back(j);
    }
    AklPoint p;
    const double norm = operator_norm(o_x.matrix);
    p.bound = norm * std::exp(-(y - x - 2.0 * g * static_cast<double>(o_x.support.size())) /
                              (2.0 * g * kappa));
    if (rows.empty() || cols.empty()) return p;
    MatrixXc block(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = 0; b < cols.size(); ++b)
        block(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = rotated(rows[a], cols[b]);
    p.lhs = operator_norm(block);
    return p;
  }
};

inline AklPoint akl_concentration_check(const LocalHamiltonian& h, const LocalTerm& o_x, double x,
                                        double y) {
  return AklContext(h).evaluate(o_x, x, y);
}

/// Random single-site O_X of unit norm; x runs over the spectrum in steps of
/// x_step and y = x + gap for every gap.
inline CheckReport akl_suite(int num_sites, int operators, const std::vector<double>& gaps,
                             double x_step, std::uint64_t seed) {
  Rng rng(seed);
  const LocalHamiltonian h = random_chain_hamiltonian(num_sites, rng);
  const AklContext ctx(h);
  CheckReport report("akl", {"operator", "site", "x", "y"});
  report.grid = {{"n", num_sites}, {"operators", operators}, {"gaps", gaps}, {"x_step", x_step},
                 {"seed", seed}, {"g", ctx.g}, {"kappa", ctx.kappa}};
  const double e_min = ctx.spec.energies.minCoeff();
  const double e_max = ctx.spec.energies.maxCoeff();
  for (int k = 0; k < operators; ++k) {
    const int site = static_cast<int>(rng.uniform() * num_sites) % num_sites;
    MatrixXc local = rng.hermitian(2);
    local /= operator_norm(local);
    const LocalTerm o_x{{site}, local};
    for (double x = e_min; x <= e_max; x += x_step)
      for (double gap : gaps) {
        const AklPoint p = ctx.evaluate(o_x, x, x + gap);
        report.assert_row({static_cast<double>(k), static_cast<double>(site), x, x + gap}, p.lhs,
                          p.bound, p.bound - p.lhs, -1e-12);
      }
  }
  return report;
}

// ---------------------------------------------------------------------------
// delta_gamma

struct SpectralConcentration {
  double gamma = 0.0;
  double delta = 0.0;          // 1 - ||P_gamma sqrt(rho)||_F^2
  double second_moment = 0.0;  // <A^2>
};

/// Spectral data of a centred observable against a thermal state.
class ConcentrationProfile {
 public:
  ConcentrationProfile(const MatrixXc& a, const GibbsEnsemble& ens) {
    if (a.rows() != ens.dim() || a.cols() != ens.dim()) throw Error("dimension mismatch");
    rho_ = ens.density();
    const double mean = expectation(a, ens);
    centred_ = hermitian_part(a) - mean * MatrixXc::Identity(a.rows(), a.cols());
    Eigen::SelfAdjointEigenSolver<MatrixXc> solver(centred_);
    eigenvalues_ = solver.eigenvalues();
    vectors_ = solver.eigenvectors();
    const MatrixXc rotated = vectors_.adjoint() * rho_ * vectors_;
    populations_ = rotated.diagonal().real();
    second_moment_ = (populations_.array() * eigenvalues_.array().square()).sum();
    sqrt_rho_ = ens.sqrt_density();
  }

  const MatrixXc& centred() const { return centred_; }
  double operator_norm() const { return eigenvalues_.cwiseAbs().maxCoeff(); }
  double second_moment() const { return second_moment_; }

  SpectralConcentration at(double gamma) const {
    double inside = 0.0;
    for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k)
      if (std::abs(eigenvalues_(k)) <= gamma) inside += populations_(k);
    return {gamma, std::clamp(1.0 - inside, 0.0, 1.0), second_moment_};
  }

  /// Q_gamma: projector onto eigenvalues of magnitude above gamma.
  MatrixXc outer_projector(double gamma) const {
    MatrixXc q = MatrixXc::Zero(vectors_.rows(), vectors_.cols());
    for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k)
      if (std::abs(eigenvalues_(k)) > gamma) q += vectors_.col(k) * vectors_.col(k).adjoint();
    return q;
  }

  const MatrixXc& sqrt_rho() const { return sqrt_rho_; }

 private:
  MatrixXc rho_;
  MatrixXc sqrt_rho_;
  MatrixXc centred_;
  VectorXd eigenvalues_;
  MatrixXc vectors_;
  VectorXd populations_;
  double second_moment_ = 0.0;
};

inline SpectralConcentration delta_gamma(const MatrixXc& a, const GibbsEnsemble& ens, double gamma) {
  if (gamma < 0.0) throw Error("gamma must be nonnegative");
  return ConcentrationProfile(a, ens).at(gamma);
}

/// Random Hermitian A on a random thermal state; asserts <A^2> >= gamma^2
/// delta_gamma and monotonicity of delta_gamma on the grid.
inline CheckReport delta_gamma_suite(const OperatorBasis& basis, double beta, int observables,
                                     int grid_points, std::uint64_t seed) {
  CheckReport report("delta-gamma", {"observable", "gamma", "delta"});
  report.grid = {{"beta", beta}, {"observables", observables}, {"grid_points", grid_points},
                 {"seed", seed}};
  for (int k = 0; k < observables; ++k) {
    Rng rng(derive_seed(seed, k));
    const GibbsEnsemble ens =
        thermal_state(basis, rng.uniform_vector(basis.m(), -1.0, 1.0), beta);
    const ConcentrationProfile prof(rng.hermitian(ens.dim()), ens);
    const double top = 1.1 * prof.operator_norm();
    double previous = 1.0;
    for (int q = 0; q < grid_points; ++q) {
      const double gamma = top * q / (grid_points - 1);
      const auto sc = prof.at(gamma);
      const double rhs = gamma * gamma * sc.delta;
      report.assert_row({static_cast<double>(k), gamma, sc.delta}, sc.second_moment, rhs,
                        sc.second_moment - rhs, -1e-10);
      if (sc.delta > previous + 1e-14) report.fail();
      previous = sc.delta;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Local unitary probe

/// Scatter of ||Q_gamma U_X sqrt(rho)||_F^2 and ||A Q_gamma U_X sqrt(rho)||_F^2
/// against delta_gamma for Haar-random U_X. The only assertion: at the
/// largest gamma, when delta_gamma < 1e-8, both norms are below 1e-6.
inline CheckReport local_unitary_probe(const MatrixXc& a, const GibbsEnsemble& ens,
                                       const std::vector<double>& gammas, const std::vector<int>& sites,
                                       int trials, std::uint64_t seed) {
  if (sites.empty() || sites.size() > 2) throw Error("local unitary support must have 1 or 2 sites");
  if (gammas.empty()) throw Error("gamma grid is empty");
  const int n = std::countr_zero(static_cast<std::uint64_t>(ens.dim()));
  const ConcentrationProfile prof(a, ens);
  const double top = *std::max_element(gammas.begin(), gammas.end());

  CheckReport report("local-unitary", {"trial", "gamma", "delta", "q_norm", "aq_norm"});
  report.grid = {{"gammas", gammas}, {"sites", sites}, {"trials", trials}, {"seed", seed}};
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    const MatrixXc u = embed_operator(rng.unitary(hilbert_dim(static_cast<int>(sites.size()))), sites, n);
    const MatrixXc u_sqrt = u * prof.sqrt_rho();
    for (double gamma : gammas) {
      const MatrixXc q = prof.outer_projector(gamma) * u_sqrt;
      const double qn = frobenius_norm_sq(q);
      const double aqn = frobenius_norm_sq(prof.centred() * q);
      const double delta = prof.at(gamma).delta;
      const std::vector<double> row{static_cast<double>(t), gamma, delta, qn, aqn};
      if (gamma == top && delta < 1e-8)
        report.assert_row(row, std::max(qn, aqn), 1e-6, 1e-6 - std::max(qn, aqn), 0.0);
      else
        report.probe_row(row, qn, delta, delta - qn);
    }
  }
  return report;
}

/// Random thermal state and random Hermitian A; gamma runs from 0 to
/// 1.1 ||A - <A>||.
inline CheckReport local_unitary_suite(const OperatorBasis& basis, double beta, int grid_points,
                                       const std::vector<int>& sites, int trials, std::uint64_t seed) {
  if (grid_points < 2) throw Error("gamma grid needs at least two points");
  Rng rng(seed);
  const GibbsEnsemble ens = thermal_state(basis, rng.uniform_vector(basis.m(), -1.0, 1.0), beta);
  const MatrixXc a = rng.hermitian(ens.dim());
  const double top = 1.1 * ConcentrationProfile(a, ens).operator_norm();
  std::vector<double> gammas(grid_points);
  for (int q = 0; q < grid_points; ++q) gammas[q] = top * q / (grid_points - 1);
  return local_unitary_probe(a, ens, gammas, sites, trials, derive_seed(seed, 1));
}

// ---------------------------------------------------------------------------
// Operator spreading

struct QuasiLocalProfile {
  std::vector<int> radii;
  std::vector<double> norms;  // ||E(t) - E^r(t)||
  double tau = 1.0;
  double a1 = 0.0;            // fitted g_r ~ a1 exp(-a2 r)
  double a2 = 0.0;
  double zeta = 0.0;          // ||E(t)||
  int center = 0;
  bool monotone = true;
  double final_norm = 0.0;
};

/// Site minimising the largest distance to the support; ties to the smallest
/// index.
inline int smallest_ball_center(const LatticeSpec& lattice, const std::vector<int>& support) {
  int best = 0;
  int best_radius = std::numeric_limits<int>::max();
  for (int c = 0; c < lattice.num_sites(); ++c) {
    int radius = 0;
    for (int s : support) radius = std::max(radius, lattice.distance(c, s));
    if (radius < best_radius) {
      best_radius = radius;
      best = c;
    }
  }
  return best;
}

/// E(t) = e^{iHt} E e^{-iHt}; truncation replaces every site outside
/// B(r, center) by a normalized identity after tracing it out. The error is
/// measured in operator norm.
inline QuasiLocalProfile lieb_robinson_decay(const MatrixXc& op, const std::vector<int>& support,
                                             const LatticeSpec& lattice,
                                             const SpectralDecomposition& spec, double t,
                                             std::vector<int> radii) {
  const int n = lattice.num_sites();
  if (radii.empty()) throw Error("radius list is empty");
  if (op.rows() != spec.dim() || hilbert_dim(n) != spec.dim()) throw Error("dimension mismatch");
  std::sort(radii.begin(), radii.end());
  VectorXc phases(spec.dim());
  for (Eigen::Index j = 0; j < spec.dim(); ++j) phases(j) = std::polar(1.0, spec.energies(j) * t);
  const MatrixXc u = spec.vectors * phases.asDiagonal() * spec.vectors.adjoint();
  const MatrixXc evolved = u * op * u.adjoint();

  QuasiLocalProfile prof;
  prof.radii = radii;
  prof.center = smallest_ball_center(lattice, support);
  prof.zeta = operator_norm(evolved);
  for (int r : radii) {
    const auto ball = lattice.ball(r, prof.center);
    std::vector<int> outside;
    for (int s = 0; s < n; ++s)
      if (std::find(ball.begin(), ball.end(), s) == ball.end()) outside.push_back(s);
    prof.norms.push_back(operator_norm(evolved - replace_sites_with_identity(evolved, outside)));
  }
  for (std::size_t k = 1; k < prof.norms.size(); ++k)
    if (prof.norms[k] > prof.norms[k - 1] + 1e-12) prof.monotone = false;
  prof.final_norm = prof.norms.back();

  // least-squares line through log g_r on the points above rounding level
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (prof.norms[k] <= 1e-12) continue;
    const double x = radii[k];
    const double y = std::log(prof.norms[k]);
    sx += x, sy += y, sxx += x * x, sxy += x * y, ++count;
  }
  if (count >= 2) {
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    prof.a2 = -slope;
    prof.a1 = std::exp((sy - slope * sx) / count);
  }
  return prof;
}

inline QuasiLocalProfile lieb_robinson_decay(const LocalBasisOp& op, const OperatorBasis& basis,
                                             const VectorXd& lambda, double t, std::vector<int> radii) {
  return lieb_robinson_decay(to_dense(op, basis.lattice), op.support, basis.lattice,
                             diagonalize(assemble_operator(basis, lambda)), t, std::move(radii));
}

/// Random unit-norm bond chain; X on `site` is evolved for each t. Asserts
/// nonincreasing truncation error over r = 1, ..., n - 1 and a vanishing
/// error once the ball covers the lattice.
inline CheckReport lr_decay_suite(int num_sites, int site, const std::vector<double>& times,
                                  std::uint64_t seed) {
  const LatticeSpec lattice = LatticeSpec::chain(num_sites);
  if (site < 0 || site >= num_sites) throw Error("site outside the chain");
  Rng rng(seed);
  const SpectralDecomposition spec = diagonalize(random_chain_hamiltonian(num_sites, rng).dense());
  const LocalBasisOp op{{site}, {Pauli::X}, 0};
  std::vector<int> radii;
  for (int r = 1; r < num_sites; ++r) radii.push_back(r);

  CheckReport report("lr-decay", {"t", "r"});
  report.grid = {{"times", times}, {"site", site}, {"n", num_sites}, {"seed", seed}, {"radii", radii}};
  nlohmann::json fits = nlohmann::json::array();
  for (double t : times) {
    const auto prof = lieb_robinson_decay(to_dense(op, lattice), op.support, lattice, spec, t, radii);
    for (std::size_t k = 0; k < radii.size(); ++k) {
      const double previous = k ? prof.norms[k - 1] : prof.norms[k];
      report.assert_row({t, static_cast<double>(radii[k])}, prof.norms[k], previous,
                        previous - prof.norms[k], -1e-12);
    }
    if (static_cast<int>(lattice.ball(radii.back(), prof.center).size()) == num_sites)
      report.assert_row({t, -1.0}, prof.final_norm, 1e-10, 1e-10 - prof.final_norm, 0.0);
    else
      report.fail();
    fits.push_back({{"t", t}, {"a1", prof.a1}, {"a2", prof.a2}, {"zeta", prof.zeta}, {"tau", prof.tau}});
  }
  report.extra = {{"fits", fits}};
  return report;
}

// ---------------------------------------------------------------------------
// Series bounds

struct SeriesSum {
  double value = 0.0;
  double tail = 0.0;  // rigorous bound on the omitted tail
};

namespace detail {

/// Sums term(j) for j = 0, 1, ... until j passes `monotone_from` and the
/// tail bound drops below `tail_tol`.
template <class Term, class Tail>
SeriesSum sum_series(Term term, Tail tail, double monotone_from, double tail_tol) {
  long double total = 0.0L;
  for (long j = 0;; ++j) {
    total += term(static_cast<double>(j));
    if (static_cast<double>(j) >= monotone_from) {
      const double rest = tail(static_cast<double>(j));
      if (rest < tail_tol) return {static_cast<double>(total), rest};
    }
    if (j > 100000000) throw Error("series did not converge");
  }
}

}  // namespace detail

/// sum_{j>=0} e^{-cj}.
inline SeriesSum geometric_sum(double c, double tail_tol = 1e-12) {
  return detail::sum_series([c](double j) { return std::exp(-c * j); },
                            [c](double j) { return std::exp(-c * (j + 1)) / (1.0 - std::exp(-c)); },
                            0.0, tail_tol);
}

/// sum_{j>=0} j^b e^{-c j^p}. Beyond the mode the tail is bounded by
/// int_J^inf x^b e^{-c x^p} dx = c^{-(b+1)/p} Gamma((b+1)/p, c J^p) / p.
inline SeriesSum power_sum(double b, double c, double p, double tail_tol = 1e-12) {
  const double s = (b + 1.0) / p;
  const double mode = std::pow(b / (c * p), 1.0 / p);
  return detail::sum_series(
      [=](double j) { return j == 0.0 ? (b == 0.0 ? 1.0 : 0.0) : std::pow(j, b) * std::exp(-c * std::pow(j, p)); },
      [=](double j) {
        return std::pow(c, -s) * boost::math::tgamma(s, c * std::pow(j, p)) / p;
      },
      std::ceil(mode), tail_tol);
}

/// sum_{j>=0} e^{-c (a+j)^p}; tail by int_J^inf e^{-c (a+x)^p} dx.
inline SeriesSum shifted_sum(double a, double c, double p, double tail_tol = 1e-12) {
  return detail::sum_series(
      [=](double j) { return std::exp(-c * std::pow(a + j, p)); },
      [=](double j) {
        return std::pow(c, -1.0 / p) * boost::math::tgamma(1.0 / p, c * std::pow(a + j, p)) / p;
      },
      0.0, tail_tol);
}

struct SumBoundPoint {
  double a, b, c, p;
};

/// c, p in {0.5, 1, 2} crossed with (a, b) in {(0.5, 1), (1, 2), (2, 3)}.
inline std::vector<SumBoundPoint> default_sum_grid() {
  std::vector<SumBoundPoint> grid;
  for (double c : {0.5, 1.0, 2.0})
    for (double p : {0.5, 1.0, 2.0})
      for (auto [a, b] : {std::pair{0.5, 1.0}, std::pair{1.0, 2.0}, std::pair{2.0, 3.0}})
        grid.push_back({a, b, c, p});
  return grid;
}

/// Bounds checked per grid point:
///   1: sum e^{-cj} <= e^c / c
///   2: sum j^b e^{-c j^p} <= (2/p) ((b+1)/(cp))^{(b+1)/p}
///   3: sum e^{-c(a+j)^p} <= e^{-(c/2) a^p} (1 + (1/p) (2/(cp))^{1/p})
/// The slack of each row is the rhs minus lhs minus the tail bound.
inline CheckReport verify_sum_bounds(const std::vector<SumBoundPoint>& grid = default_sum_grid(),
                                     double tail_tol = 1e-12) {
  CheckReport report("sum-bounds", {"bound", "a", "b", "c", "p", "tail"});
  nlohmann::json points = nlohmann::json::array();
  for (const auto& g : grid) points.push_back({g.a, g.b, g.c, g.p});
  report.grid = {{"points", points}, {"tail_tol", tail_tol}};
  for (const auto& g : grid) {
    if (!(g.c > 0.0 && g.p > 0.0 && g.a > 0.0 && g.b > 0.0))
      throw Error("series parameters must be positive");
    const SeriesSum s1 = geometric_sum(g.c, tail_tol);
    const double r1 = std::exp(g.c) / g.c;
    const SeriesSum s2 = power_sum(g.b, g.c, g.p, tail_tol);
    const double r2 = (2.0 / g.p) * std::pow((g.b + 1.0) / (g.c * g.p), (g.b + 1.0) / g.p);
    const SeriesSum s3 = shifted_sum(g.a, g.c, g.p, tail_tol);
    const double r3 = std::exp(-0.5 * g.c * std::pow(g.a, g.p)) *
                      (1.0 + std::pow(2.0 / (g.c * g.p), 1.0 / g.p) / g.p);
    int id = 1;
    for (auto [s, r] : {std::pair{s1, r1}, std::pair{s2, r2}, std::pair{s3, r3}}) {
      if (!(s.tail < tail_tol)) report.fail();
      report.assert_row({static_cast<double>(id++), g.a, g.b, g.c, g.p, s.tail}, s.value, r,
                        r - s.value - s.tail, 0.0);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Product-state lower-bound family

struct LowerBoundValue {
  double closed_form = 0.0;  // prod_i 2 e^{beta mu_i} / (e^{beta mu_i} + 1)
  double envelope = 0.0;     // e^{10 beta eps sqrt(m)}
};

/// Family H(mu) = -sum_i mu_i |0><0|_i on m qubits, so 2^m ||rho_beta(mu)||
/// factorizes over sites.
inline void validate_lower_bound_family(const VectorXd& mu, double epsilon) {
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
  if ((mu.array() < 0.0).any()) throw Error("mu must be nonnegative");
  if (mu.squaredNorm() > 100.0 * epsilon * epsilon * (1.0 + 1e-12))
    throw Error("mu violates sum mu_i^2 <= 100 eps^2");
}

inline LowerBoundValue lower_bound_family(double beta, double epsilon, const VectorXd& mu) {
  validate_lower_bound_family(mu, epsilon);
  LowerBoundValue out{1.0, 0.0};
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double w = std::exp(beta * mu(i));
    out.closed_form *= 2.0 * w / (w + 1.0);
  }
  out.envelope = std::exp(10.0 * beta * epsilon * std::sqrt(static_cast<double>(mu.size())));
  return out;
}

inline MatrixXc lower_bound_hamiltonian(const VectorXd& mu) {
  const int m = static_cast<int>(mu.size());
  check_dense_cap(m);
  MatrixXc p0 = MatrixXc::Zero(2, 2);
  p0(0, 0) = 1.0;
  MatrixXc h = MatrixXc::Zero(hilbert_dim(m), hilbert_dim(m));
  for (int i = 0; i < m; ++i) h -= mu(i) * embed_operator(p0, {i}, m);
  return h;
}

/// 2^m ||rho_beta(mu)|| from the dense Gibbs state.
inline double lower_bound_dense(double beta, const VectorXd& mu) {
  const GibbsEnsemble ens = gibbs(diagonalize(lower_bound_hamiltonian(mu)), beta);
  return std::ldexp(ens.weights.maxCoeff(), static_cast<int>(mu.size()));
}

/// Random feasible mu: nonnegative direction, radius uniform in [0, 10 eps].
inline VectorXd random_feasible_mu(int m, double epsilon, Rng& rng) {
  const VectorXd dir = rng.unit_vector(m).cwiseAbs();
  return dir * (10.0 * epsilon * rng.uniform());
}

/// Dense agreement for m = 1..dense_max (one random mu each) and the
/// envelope on `trials` random mu at every m up to m_max.
inline CheckReport lower_bound_suite(double beta, double epsilon, int dense_max, int m_max, int trials,
                                     std::uint64_t seed) {
  CheckReport report("lower-bound", {"kind", "m", "trial"});
  report.grid = {{"beta", beta}, {"epsilon", epsilon}, {"dense_max", dense_max}, {"m_max", m_max},
                 {"trials", trials}, {"seed", seed}};
  Rng rng(seed);
  for (int m = 1; m <= dense_max; ++m) {
    const VectorXd mu = random_feasible_mu(m, epsilon, rng);
    const double closed = lower_bound_family(beta, epsilon, mu).closed_form;
    const double dense = lower_bound_dense(beta, mu);
    const double diff = std::abs(closed - dense);
    report.assert_row({1.0, static_cast<double>(m), 0.0}, dense, closed, 1e-10 - diff, 0.0);
  }
  for (int m = 1; m <= m_max; ++m)
    for (int t = 0; t < trials; ++t) {
      const auto v = lower_bound_family(beta, epsilon, random_feasible_mu(m, epsilon, rng));
      report.assert_row({2.0, static_cast<double>(m), static_cast<double>(t)}, v.closed_form,
                        v.envelope, v.envelope - v.closed_form, 0.0);
    }
  return report;
}

// ---------------------------------------------------------------------------
// Fourier pair

inline CheckReport fourier_suite(const std::vector<double>& betas, double omega_max, int points,
                                 double tolerance = 1e-4, const QuadratureConfig& cfg = {}) {
  CheckReport report("fourier", {"beta", "omega", "gap"});
  report.grid = {{"betas", betas}, {"omega_max", omega_max}, {"points", points}, {"tolerance", tolerance}};
  std::vector<double> omegas(points);
  for (int k = 0; k < points; ++k)
    omegas[k] = points > 1 ? -omega_max + 2.0 * omega_max * k / (points - 1) : 0.0;
  for (double beta : betas) {
    const FourierCheck check = verify_fourier_pair(FilterKernel{beta}, omegas, cfg);
    for (const auto& pt : check.points)
      report.assert_row({beta, pt.omega, pt.refinement_gap}, pt.quadrature, pt.closed_form,
                        tolerance - pt.error, 0.0);
  }
  return report;
}

}  // namespace gibbslearn

#endif  // GIBBSLEARN_LAB_HPP
