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

#include "gibbslearn/lab.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace gl = gibbslearn;

namespace {

gl::OperatorBasis chain(int n, int kappa) { return gl::enumerate_basis(gl::LatticeSpec::chain(n), kappa); }

/// Keeps the Pauli components of `op` that act as identity on `site`.
oracle::Mat keep_identity_on(const oracle::Mat& op, int n, int site) {
  oracle::Mat out = oracle::Mat::Zero(op.rows(), op.cols());
  for (const auto& [letters, coeff] : oracle::pauli_expansion(op, n))
    if (letters[site] == 'I') out += coeff * oracle::pauli_string(letters);
  return out;
}

}  // namespace

TEST(Reduction, PartialTraceMatchesPauliExpansion) {
  gl::Rng rng(61);
  const gl::MatrixXc op = rng.ginibre(8, 8);
  for (int site = 0; site < 3; ++site)
    EXPECT_LT((gl::replace_with_identity(op, site) - keep_identity_on(op, 3, site)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Reduction, EmbedMatchesKronecker) {
  gl::Rng rng(62);
  const gl::MatrixXc a = rng.hermitian(2);
  const gl::MatrixXc b = rng.hermitian(2);
  const gl::MatrixXc ab = Eigen::kroneckerProduct(a, b).eval();
  oracle::Mat ref = Eigen::kroneckerProduct(a, oracle::pauli('I')).eval();
  ref = Eigen::kroneckerProduct(ref, b).eval();
  EXPECT_LT((gl::embed_operator(ab, {0, 2}, 3) - ref).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(gl::embed_operator(ab, {0, 0}, 3), gl::Error);
  EXPECT_THROW(gl::embed_operator(ab, {0, 3}, 3), gl::Error);
  EXPECT_THROW(gl::qubit_count(gl::MatrixXc::Zero(3, 3)), gl::Error);
}

TEST(GlobalToLocal, TwoBodyPauliSaturatesSum) {
  // X0 X1: each local reduction is the whole operator
  const gl::MatrixXc op = oracle::pauli_string("XX");
  const auto g = gl::global_to_local_check(op, {0, 1});
  EXPECT_NEAR(g.norm_sq, 4.0, 1e-14);
  EXPECT_NEAR(g.sum_local, 8.0, 1e-14);
  EXPECT_NEAR(g.max_local, 4.0, 1e-14);
  EXPECT_TRUE(g.pass);
}

TEST(GlobalToLocal, SingleSiteFieldsSaturateMax) {
  // Z0 + Z1 + Z2: sum of local reductions equals the norm
  const gl::MatrixXc op = oracle::pauli_string("ZII") + oracle::pauli_string("IZI") + oracle::pauli_string("IIZ");
  const auto g = gl::global_to_local_check(op, {0, 1, 2});
  EXPECT_NEAR(g.sum_slack, 0.0, 1e-12);
  EXPECT_NEAR(g.max_slack, 0.0, 1e-12);
}

TEST(GlobalToLocal, IdentityComponentIgnoredAndSupportChecked) {
  const gl::MatrixXc op = oracle::pauli_string("XI") + 3.0 * oracle::pauli_string("II");
  EXPECT_NEAR(gl::global_to_local_check(op, {0}).norm_sq, 4.0, 1e-14);
  EXPECT_THROW(gl::global_to_local_check(oracle::pauli_string("XZ"), {0}), gl::Error);
  const auto report = gl::global_to_local_suite(3, 25, 9);
  EXPECT_TRUE(report.pass);
  EXPECT_EQ(report.rows.size(), 50u);
}

TEST(Convexity, ProbePassesAndMatchesHessian) {
  gl::Rng rng(63);
  const auto basis = chain(3, 2);
  const auto probe = gl::strong_convexity_probe(basis, rng.uniform_vector(basis.m(), -1, 1), 1.0, 30, 4);
  EXPECT_TRUE(probe.report.pass);
  EXPECT_GE(probe.min_q_times_m / basis.m(), probe.hessian_min_eigenvalue - 1e-12);
}

TEST(Convexity, InfiniteTemperatureWithZeroHamiltonian) {
  gl::Rng rng(64);
  const auto basis = chain(3, 2);
  const gl::VectorXd v = rng.unit_vector(basis.m());
  const auto r = gl::infinite_temp_variance(basis, gl::VectorXd::Zero(basis.m()), 0.8, v);
  EXPECT_NEAR(r.lhs, v.squaredNorm(), 1e-12);
  const auto report =
      gl::infinite_temp_variance_check(basis, rng.uniform_vector(basis.m(), -1, 1), 1.0, 20, 5);
  EXPECT_TRUE(report.pass);
}

TEST(Convexity, LocalVarianceIsPositive) {
  gl::Rng rng(65);
  const auto basis = chain(3, 2);
  const auto report = gl::local_variance_suite(basis, rng.uniform_vector(basis.m(), -1, 1), 1.0, 10, 6);
  EXPECT_TRUE(report.pass);
  const auto r = gl::local_variance_floor(basis, gl::VectorXd::Zero(basis.m()), 1.0, gl::VectorXd::Unit(basis.m(), 0));
  EXPECT_NEAR(r.per_site[0], 1.0, 1e-12);  // W = X0
  EXPECT_NEAR(r.per_site[1], 0.0, 1e-12);
}

TEST(Akl, CommutingOperatorHasNoLeakage) {
  // O = H itself maps energy shells to themselves
  gl::Rng rng(66);
  const auto h = gl::random_chain_hamiltonian(4, rng);
  EXPECT_EQ(h.interaction_degree(), 2);
  EXPECT_EQ(h.locality(), 2);
  EXPECT_NEAR(h.max_term_norm(), 1.0, 1e-12);
  const gl::AklContext ctx(h);
  const gl::MatrixXc dense = h.dense();
  const gl::LocalTerm whole{{0, 1, 2, 3}, dense / gl::operator_norm(dense)};
  const auto p = ctx.evaluate(whole, -0.5, 0.5);
  EXPECT_LT(p.lhs, 1e-12);
}

TEST(Akl, SuiteHasNoViolations) {
  const auto report = gl::akl_suite(4, 3, {2.0, 4.0, 6.0}, 0.5, 7);
  EXPECT_TRUE(report.pass);
  EXPECT_FALSE(report.rows.empty());
}

TEST(DeltaGamma, MatchesBruteForceWindow) {
  gl::Rng rng(67);
  const auto basis = chain(2, 2);
  const auto ens = gl::thermal_state(basis, rng.uniform_vector(basis.m(), -1, 1), 1.0);
  const gl::MatrixXc a = rng.hermitian(4);
  const oracle::Mat rho = ens.density();
  const double mean = (a * rho).trace().real();
  Eigen::SelfAdjointEigenSolver<oracle::Mat> solver(a - mean * oracle::Mat::Identity(4, 4));
  for (double gamma : {0.0, 0.3, 1.0, 2.0, 10.0}) {
    oracle::Mat p = oracle::Mat::Zero(4, 4);
    for (int k = 0; k < 4; ++k)
      if (std::abs(solver.eigenvalues()(k)) <= gamma) p += solver.eigenvectors().col(k) * solver.eigenvectors().col(k).adjoint();
    const double ref = 1.0 - (p * rho).trace().real();
    const auto sc = gl::delta_gamma(a, ens, gamma);
    EXPECT_NEAR(sc.delta, std::clamp(ref, 0.0, 1.0), 1e-12);
    EXPECT_GE(sc.second_moment, gamma * gamma * sc.delta - 1e-12);
  }
  EXPECT_THROW(gl::delta_gamma(a, ens, -1.0), gl::Error);
}

TEST(DeltaGamma, SuitesPass) {
  const auto basis = chain(2, 2);
  EXPECT_TRUE(gl::delta_gamma_suite(basis, 1.0, 5, 10, 8).pass);
  EXPECT_TRUE(gl::local_unitary_suite(basis, 1.0, 8, {0}, 3, 9).pass);
}

TEST(LiebRobinson, FullBallIsExactAndDecayIsMonotone) {
  const auto report = gl::lr_decay_suite(5, 2, {0.5, 1.0}, 10);
  EXPECT_TRUE(report.pass);
  gl::Rng rng(11);
  const auto lattice = gl::LatticeSpec::chain(4);
  const auto spec = gl::diagonalize(gl::random_chain_hamiltonian(4, rng).dense());
  const auto prof = gl::lieb_robinson_decay(oracle::embed(4, {0}, "Z"), {0}, lattice, spec, 0.0, {0, 1, 3});
  for (double g : prof.norms) EXPECT_LT(g, 1e-12);  // no evolution, no spreading
  EXPECT_EQ(gl::smallest_ball_center(lattice, {1, 2}), 1);
}

TEST(Series, ValuesAgainstClosedForms) {
  EXPECT_NEAR(gl::geometric_sum(1.0).value, oracle::kGeometricSumC1, 1e-11);
  EXPECT_NEAR(gl::power_sum(1.0, 1.0, 1.0).value, oracle::kLinearSumC1, 1e-11);
  // p = 1: sum e^{-c(a+j)} = e^{-ca} / (1 - e^{-c})
  EXPECT_NEAR(gl::shifted_sum(2.0, 0.5, 1.0).value, std::exp(-1.0) / (1.0 - std::exp(-0.5)), 1e-11);
  EXPECT_LT(gl::geometric_sum(0.5).tail, 1e-12);
  const auto report = gl::verify_sum_bounds();
  EXPECT_TRUE(report.pass);
  EXPECT_EQ(report.rows.size(), 81u);
}

TEST(LowerBound, ClosedFormMatchesDense) {
  gl::VectorXd mu(4);
  mu << 0.1, 0.0, 0.3, 0.2;
  const auto v = gl::lower_bound_family(1.5, 0.1, mu);
  EXPECT_NEAR(v.closed_form, gl::lower_bound_dense(1.5, mu), 1e-12);
  EXPECT_NEAR(v.envelope, std::exp(10.0 * 1.5 * 0.1 * 2.0), 1e-12);
  EXPECT_THROW(gl::lower_bound_family(1.0, 0.1, -mu), gl::Error);
  EXPECT_THROW(gl::lower_bound_family(1.0, 0.01, mu), gl::Error);
  EXPECT_TRUE(gl::lower_bound_suite(1.0, 0.1, 5, 6, 10, 12).pass);
}

TEST(Fourier, SuitePasses) {
  const auto report = gl::fourier_suite({1.0}, 3.0, 7);
  EXPECT_TRUE(report.pass);
  EXPECT_EQ(report.rows.size(), 7u);
}

TEST(Report, MergeAndCsv) {
  gl::CheckReport a("demo", {"x"});
  a.assert_row({1.0}, 2.0, 3.0, 1.0, 0.0);
  gl::CheckReport b("demo", {"x"});
  b.assert_row({2.0}, 3.0, 2.0, -1.0, 0.0);
  b.probe_row({3.0}, 0.0, 0.0, -5.0);
  EXPECT_TRUE(a.pass);
  EXPECT_FALSE(b.pass);
  EXPECT_EQ(b.min_slack, -1.0);  // probes do not count
  const auto merged = gl::CheckReport::merge({a, b});
  EXPECT_FALSE(merged.pass);
  EXPECT_EQ(merged.rows.size(), 3u);
  std::ostringstream out;
  merged.write_csv(out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "part,x,lhs,rhs,slack");
  EXPECT_EQ(merged.summary().at("rows").get<int>(), 3);
  gl::CheckReport other("demo", {"y"});
  EXPECT_THROW(gl::CheckReport::merge({a, other}), gl::Error);
  EXPECT_THROW(a.assert_row({1.0, 2.0}, 0, 0, 0, 0), gl::Error);
}
