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

#include "gibbslearn/qbp.hpp"
#include "gibbslearn/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace gl = gibbslearn;

namespace {

gl::OperatorBasis chain(int n, int kappa) { return gl::enumerate_basis(gl::LatticeSpec::chain(n), kappa); }

std::function<double(const oracle::Vec&)> oracle_log_z(const gl::OperatorBasis& basis, double beta) {
  return [&basis, beta](const oracle::Vec& x) { return oracle::log_z(gl::assemble_operator(basis, x), beta); };
}

}  // namespace

TEST(Filter, ClosedFormValues) {
  const gl::FilterKernel unit{1.0};
  EXPECT_NEAR(gl::f_tilde(1.0, unit), oracle::kFilterAtOne, 1e-12);
  EXPECT_NEAR(gl::f_tilde(2.5, unit), oracle::kFilterAtTwoHalf, 1e-12);
  EXPECT_NEAR(gl::f_tilde(-2.5, unit), oracle::kFilterAtTwoHalf, 1e-12);
  EXPECT_DOUBLE_EQ(gl::f_tilde(0.0, unit), 1.0);
  EXPECT_NEAR(gl::f_tilde(1e-7, unit), 1.0, 1e-14);
  EXPECT_NEAR(gl::f_time(1.0, unit), oracle::kTimeKernelAtOne, 1e-12);
  EXPECT_THROW(gl::f_time(0.0, unit), gl::Error);
}

TEST(Filter, SmallArgumentBranchIsContinuous) {
  const gl::FilterKernel k{2.0};
  const double just_below = 0.999e-6 / 2.0;
  const double just_above = 1.001e-6 / 2.0;
  EXPECT_NEAR(gl::f_tilde(just_below, k), gl::f_tilde(just_above, k), 1e-13);
}

TEST(Filter, FourierPairAgreesWithQuadrature) {
  const auto check = gl::verify_fourier_pair(gl::FilterKernel{1.0}, {-3.0, -0.5, 0.0, 0.7, 4.0});
  EXPECT_LT(check.max_error, 1e-6);
  for (const auto& pt : check.points) EXPECT_LE(pt.refinement_gap, 1e-6);
}

TEST(Qbp, CommutingOperatorIsUnchanged) {
  gl::Rng rng(31);
  const auto basis = chain(3, 2);
  const auto spec = gl::diagonalize(gl::assemble_operator(basis, rng.uniform_vector(basis.m(), -1, 1)));
  const gl::MatrixXc h = spec.reconstruct();
  const gl::MatrixXc out = gl::qbp_transform(h, spec, 1.5);
  EXPECT_LT((out - h).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((gl::qbp_transform(gl::MatrixXc::Identity(8, 8), spec, 1.5) - gl::MatrixXc::Identity(8, 8))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Qbp, DerivativeOfExponentialMatchesFiniteDifference) {
  // d/ds e^{-beta (H + sV)} at s=0 equals -(beta/2) {Phi(V), e^{-beta H}}
  gl::Rng rng(32);
  const double beta = 0.8;
  const gl::MatrixXc h = rng.hermitian(4);
  const gl::MatrixXc v = rng.hermitian(4);
  const auto spec = gl::diagonalize(h);
  const gl::MatrixXc phi = gl::qbp_transform(v, spec, beta);
  const gl::MatrixXc e0 = (-beta * h).exp();
  const double s = 1e-5;
  const gl::MatrixXc fd = ((-beta * (h + s * v)).exp() - (-beta * (h - s * v)).exp()) / (2 * s);
  const gl::MatrixXc analytic = -0.5 * beta * (phi * e0 + e0 * phi);
  EXPECT_LT((fd - analytic).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Hessian, GradientMatchesFiniteDifferences) {
  gl::Rng rng(33);
  const auto basis = chain(3, 2);
  for (double beta : {0.2, 1.0, 3.0}) {
    const gl::VectorXd mu = rng.uniform_vector(basis.m(), -1, 1);
    const gl::VectorXd g = gl::grad_logZ(basis, mu, beta);
    const gl::VectorXd ref = oracle::central_gradient(oracle_log_z(basis, beta), mu, 1e-5);
    EXPECT_LT((g - ref).norm() / ref.norm(), 1e-6) << "beta=" << beta;
  }
}

TEST(Hessian, MatchesSecondDifferences) {
  gl::Rng rng(34);
  const auto basis = chain(2, 2);
  for (double beta : {0.2, 1.0, 3.0}) {
    const gl::VectorXd mu = rng.uniform_vector(basis.m(), -1, 1);
    const auto report = gl::hessian_logZ(basis, mu, beta);
    const Eigen::MatrixXd ref =
        oracle::second_differences(oracle_log_z(basis, beta), mu, 1e-3 / std::max(1.0, beta));
    EXPECT_LT((report.matrix - ref).cwiseAbs().maxCoeff(), 1e-5) << "beta=" << beta;
    EXPECT_LT(report.asymmetry, 1e-10);
    EXPECT_GT(report.min_eigenvalue, 0.0);
  }
}

TEST(Hessian, CommutingModelIsClassicalCovariance) {
  // all-Z chain: Hessian = beta^2 Cov(E_j, E_k)
  gl::Rng rng(35);
  const auto full = chain(3, 2);
  gl::OperatorBasis zbasis{full.lattice, full.kappa, {}};
  for (const auto& op : full.ops)
    if (std::all_of(op.letters.begin(), op.letters.end(), [](gl::Pauli p) { return p == gl::Pauli::Z; })) {
      zbasis.ops.push_back(op);
      zbasis.ops.back().index = static_cast<int>(zbasis.ops.size()) - 1;
    }
  ASSERT_EQ(zbasis.m(), 5);
  const double beta = 1.3;
  const gl::VectorXd mu = rng.uniform_vector(zbasis.m(), -1, 1);
  const auto report = gl::hessian_logZ(zbasis, mu, beta);
  const auto rho = oracle::gibbs_state(gl::assemble_operator(zbasis, mu), beta);
  std::vector<oracle::Mat> ops;
  for (const auto& op : zbasis.ops) ops.push_back(oracle::embed(3, op.support, std::string(op.support.size(), 'Z')));
  for (int j = 0; j < zbasis.m(); ++j)
    for (int k = 0; k < zbasis.m(); ++k) {
      const double ej = (ops[j] * rho).trace().real();
      const double ek = (ops[k] * rho).trace().real();
      const double cov = (ops[j] * ops[k] * rho).trace().real() - ej * ek;
      EXPECT_NEAR(report.matrix(j, k), beta * beta * cov, 1e-12);
    }
}

TEST(Hessian, ZeroHamiltonianIsScaledIdentity) {
  const auto basis = chain(3, 2);
  const double beta = 0.7;
  const auto report = gl::hessian_logZ(basis, gl::VectorXd::Zero(basis.m()), beta);
  EXPECT_LT((report.matrix - beta * beta * Eigen::MatrixXd::Identity(basis.m(), basis.m())).cwiseAbs().maxCoeff(),
            1e-13);
}

TEST(Hessian, BudgetGuard) {
  const auto basis = chain(3, 2);
  gl::HessianOptions tight;
  tight.budget = 10.0;
  EXPECT_THROW(gl::hessian_logZ(basis, gl::VectorXd::Zero(basis.m()), 1.0, tight), gl::Error);
}

TEST(Hessian, JsonSummary) {
  const auto basis = chain(2, 1);
  const auto report = gl::hessian_logZ(basis, gl::VectorXd::Zero(basis.m()), 1.0);
  const auto j = gl::hessian_to_json(report, true);
  EXPECT_NEAR(j.at("min_eig").get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(j.contains("matrix"));
  EXPECT_FALSE(gl::hessian_to_json(report, false).contains("matrix"));
}

TEST(Qbp, QuasilocalWIsHermitianAndLinear) {
  gl::Rng rng(36);
  const auto basis = chain(3, 2);
  const gl::VectorXd mu = rng.uniform_vector(basis.m(), -1, 1);
  const gl::VectorXd a = rng.unit_vector(basis.m());
  const gl::VectorXd b = rng.unit_vector(basis.m());
  const gl::MatrixXc wa = gl::quasilocal_W(a, basis, mu, 1.0);
  const gl::MatrixXc wb = gl::quasilocal_W(b, basis, mu, 1.0);
  const gl::MatrixXc wab = gl::quasilocal_W(2.0 * a - b, basis, mu, 1.0);
  EXPECT_TRUE(gl::is_hermitian(wa, 1e-12));
  EXPECT_LT((wab - (2.0 * wa - wb)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(gl::quasilocal_W(gl::VectorXd::Zero(3), basis, mu, 1.0), gl::Error);
}
