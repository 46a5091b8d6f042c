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

#include "gibbslearn/measurement.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace gl = gibbslearn;

namespace {

struct Fixture {
  gl::OperatorBasis basis;
  gl::VectorXd mu;
  gl::GibbsEnsemble ens;
};

Fixture make_fixture(int n, int kappa, double beta, std::uint64_t seed) {
  gl::Rng rng(seed);
  Fixture f{gl::enumerate_basis(gl::LatticeSpec::chain(n), kappa), {}, {}};
  f.mu = rng.uniform_vector(f.basis.m(), -1, 1);
  f.ens = gl::thermal_state(f.basis, f.mu, beta);
  return f;
}

}  // namespace

TEST(Plan, GroupsCommuteAndCoverBasis) {
  const auto f = make_fixture(4, 2, 1.0, 41);
  const auto plan = gl::build_plan(f.basis, gl::Scheme::grouped, 100000);
  std::vector<int> seen(f.basis.m(), 0);
  for (const auto& g : plan.groups) {
    for (int l : g) ++seen[l];
    for (int a : g)
      for (int b : g) {
        const auto da = gl::to_dense(f.basis.ops[a], f.basis.lattice);
        const auto db = gl::to_dense(f.basis.ops[b], f.basis.lattice);
        EXPECT_LT((da * db - db * da).cwiseAbs().maxCoeff(), 1e-12);
      }
  }
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_LT(plan.groups.size(), static_cast<std::size_t>(f.basis.m()));
  EXPECT_LE(plan.copies(), 100000);
}

TEST(Plan, DirectSchemeUsesOneGroupPerOperator) {
  const auto f = make_fixture(3, 2, 1.0, 42);
  const auto plan = gl::build_plan(f.basis, gl::Scheme::direct, 2700);
  EXPECT_EQ(plan.groups.size(), 27u);
  EXPECT_EQ(plan.shots_per_group, 100);
}

TEST(Plan, RejectsBudgetBelowOneShotPerGroup) {
  const auto f = make_fixture(3, 2, 1.0, 43);
  EXPECT_THROW(gl::build_plan(f.basis, gl::Scheme::direct, 26), gl::Error);
  EXPECT_NO_THROW(gl::build_plan(f.basis, gl::Scheme::exact, 0));
}

TEST(Sampling, ExactSchemeReturnsTrueMarginals) {
  const auto f = make_fixture(3, 2, 1.0, 44);
  const auto est = gl::sample_outcomes(gl::build_plan(f.basis, gl::Scheme::exact, 0), f.basis, f.ens, 1);
  EXPECT_LT((est.e_hat - gl::marginals(f.basis, f.ens)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(est.delta_max(), 0.0);
  EXPECT_EQ(est.n_total, 0);
}

TEST(Sampling, DeterministicInSeed) {
  const auto f = make_fixture(3, 2, 1.0, 45);
  const auto plan = gl::build_plan(f.basis, gl::Scheme::grouped, 9000);
  const auto a = gl::sample_outcomes(plan, f.basis, f.ens, 77);
  const auto b = gl::sample_outcomes(plan, f.basis, f.ens, 77);
  const auto c = gl::sample_outcomes(plan, f.basis, f.ens, 78);
  EXPECT_EQ(a.e_hat, b.e_hat);
  EXPECT_NE(a.e_hat, c.e_hat);
}

TEST(Sampling, EstimatesWithinHoeffdingRadius) {
  const auto f = make_fixture(3, 2, 1.0, 46);
  const gl::VectorXd truth = gl::marginals(f.basis, f.ens);
  const auto plan = gl::build_plan(f.basis, gl::Scheme::grouped, 200000);
  int outside = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto est = gl::sample_outcomes(plan, f.basis, f.ens, seed, 0.05);
    for (int l = 0; l < f.basis.m(); ++l)
      if (std::abs(est.e_hat(l) - truth(l)) > est.delta(l)) ++outside;
    EXPECT_NEAR(est.delta_max(), gl::hoeffding_radius(plan.shots_per_group, f.basis.m(), 0.05), 0.0);
  }
  EXPECT_EQ(outside, 0);
}

TEST(Sampling, MeanConvergesWithinFiveStandardErrors) {
  // each estimate is a mean of +/-1 outcomes with variance 1 - e^2
  const auto f = make_fixture(2, 2, 0.8, 47);
  const gl::VectorXd truth = gl::marginals(f.basis, f.ens);
  const auto plan = gl::build_plan(f.basis, gl::Scheme::direct, 15 * 40000);
  const auto est = gl::sample_outcomes(plan, f.basis, f.ens, 5);
  for (int l = 0; l < f.basis.m(); ++l) {
    const double se = std::sqrt((1.0 - truth(l) * truth(l)) / plan.shots_per_group);
    EXPECT_LE(std::abs(est.e_hat(l) - truth(l)), 5.0 * se + 1e-12) << f.basis.ops[l].label();
  }
}

TEST(Sampling, JointOutcomesRespectProductStructure) {
  // product state of Z eigenstates: Z0 Z1 outcome is the product of Z0 and Z1
  const auto basis = gl::enumerate_basis(gl::LatticeSpec::chain(2), 2);
  gl::VectorXd mu = gl::VectorXd::Zero(basis.m());
  mu(2) = -1.0;  // Z0
  mu(5) = 1.0;   // Z1
  const auto ens = gl::thermal_state(basis, mu, 40.0);
  const auto plan = gl::build_plan(basis, gl::Scheme::grouped, 15000);
  const auto est = gl::sample_outcomes(plan, basis, ens, 3);
  EXPECT_DOUBLE_EQ(est.e_hat(2), 1.0);
  EXPECT_DOUBLE_EQ(est.e_hat(5), -1.0);
  EXPECT_DOUBLE_EQ(est.e_hat(14), -1.0);  // Z0 Z1
}

TEST(Sampling, RejectsBadFailureProbability) {
  const auto f = make_fixture(2, 1, 1.0, 48);
  const auto plan = gl::build_plan(f.basis, gl::Scheme::direct, 600);
  EXPECT_THROW(gl::sample_outcomes(plan, f.basis, f.ens, 1, 0.0), gl::Error);
  EXPECT_THROW(gl::sample_outcomes(plan, f.basis, f.ens, 1, 1.0), gl::Error);
}

TEST(Radius, HoeffdingFormula) {
  EXPECT_NEAR(gl::hoeffding_radius(1000, 27, 0.05), std::sqrt(2.0 * std::log(2.0 * 27 / 0.05) / 1000.0), 1e-15);
  EXPECT_EQ(gl::hoeffding_radius(0, 27, 0.05), 0.0);
  EXPECT_NEAR(gl::required_delta(0.1, 0.5, 1.0, 4), 0.5 * 0.1 / (2.0 * 2.0), 1e-15);
  EXPECT_THROW(gl::required_delta(0.1, 0.0, 1.0, 4), gl::Error);
}

TEST(Output, EstimatesCsvLayout) {
  const auto f = make_fixture(2, 1, 1.0, 49);
  const auto est = gl::sample_outcomes(gl::build_plan(f.basis, gl::Scheme::direct, 600), f.basis, f.ens, 2);
  std::ostringstream out;
  gl::write_estimates_csv(out, est);
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("index,e_hat,delta,shots\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
  EXPECT_EQ(text.find('\r'), std::string::npos);
  const auto j = gl::estimates_manifest(est);
  EXPECT_EQ(j.at("N_total").get<long>(), 600);
  EXPECT_EQ(j.at("scheme").get<std::string>(), "direct");
}
