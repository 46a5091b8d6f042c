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

#include "gibbslearn/lattice.hpp"
#include "gibbslearn/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <set>
#include <string>

namespace gl = gibbslearn;

namespace {

std::string letters_of(const gl::LocalBasisOp& op) {
  std::string s;
  for (auto p : op.letters) s += gl::pauli_char(p);
  return s;
}

/// Every Pauli string on the chain with weight <= kappa and contiguous
/// support of length <= kappa, as letter strings.
std::set<std::string> brute_force_chain_basis(int n, int kappa) {
  std::set<std::string> out;
  const char letters[] = {'I', 'X', 'Y', 'Z'};
  long total = 1;
  for (int k = 0; k < n; ++k) total *= 4;
  for (long code = 1; code < total; ++code) {
    std::string s(n, 'I');
    long c = code;
    for (int k = n - 1; k >= 0; --k, c /= 4) s[k] = letters[c % 4];
    int first = n, last = -1;
    for (int k = 0; k < n; ++k)
      if (s[k] != 'I') first = std::min(first, k), last = std::max(last, k);
    if (last - first <= kappa - 1) out.insert(s);
  }
  return out;
}

}  // namespace

TEST(Basis, CountsOnChains) {
  EXPECT_EQ(gl::enumerate_basis(gl::LatticeSpec::chain(2), 1).m(), 6);
  EXPECT_EQ(gl::enumerate_basis(gl::LatticeSpec::chain(2), 2).m(), 15);
  EXPECT_EQ(gl::enumerate_basis(gl::LatticeSpec::chain(3), 2).m(), 27);
  EXPECT_EQ(gl::enumerate_basis(gl::LatticeSpec::chain(4), 2).m(), 39);
}

TEST(Basis, MatchesBruteForceEnumeration) {
  for (int n = 1; n <= 5; ++n)
    for (int kappa = 1; kappa <= std::min(n, 3); ++kappa) {
      const auto basis = gl::enumerate_basis(gl::LatticeSpec::chain(n), kappa);
      std::set<std::string> got;
      for (const auto& op : basis.ops) got.insert(oracle::place(n, op.support, letters_of(op)));
      EXPECT_EQ(got.size(), basis.ops.size()) << "duplicates at n=" << n;
      EXPECT_EQ(got, brute_force_chain_basis(n, kappa)) << "n=" << n << " kappa=" << kappa;
    }
}

TEST(Basis, CanonicalOrder) {
  const auto basis = gl::enumerate_basis(gl::LatticeSpec::chain(2), 2);
  std::vector<std::string> labels;
  for (const auto& op : basis.ops) labels.push_back(op.label());
  const std::vector<std::string> expected{"X0", "Y0", "Z0", "X1", "Y1", "Z1", "X0 X1", "X0 Y1",
                                          "X0 Z1", "Y0 X1", "Y0 Y1", "Y0 Z1", "Z0 X1", "Z0 Y1", "Z0 Z1"};
  EXPECT_EQ(labels, expected);
  for (int l = 0; l < basis.m(); ++l) EXPECT_EQ(basis.ops[l].index, l);
}

TEST(Basis, LocalityAboveSystemSizeRejected) {
  EXPECT_THROW(
      {
        try {
          gl::enumerate_basis(gl::LatticeSpec::chain(2), 3);
        } catch (const gl::Error& e) {
          EXPECT_STREQ(e.what(), "locality exceeds system size");
          throw;
        }
      },
      gl::Error);
}

TEST(Basis, PeriodicChainAddsWrapBonds) {
  const auto open = gl::enumerate_basis(gl::LatticeSpec::chain(4), 2);
  const auto ring = gl::enumerate_basis(gl::LatticeSpec::chain(4, true), 2);
  EXPECT_EQ(ring.m() - open.m(), 9);
}

TEST(Basis, SquareLatticeUsesManhattanDistance) {
  gl::LatticeSpec sq{{2, 2}, false, 2};
  const auto basis = gl::enumerate_basis(sq, 2);
  // 4 sites x 3 letters + 4 nearest-neighbour pairs x 9
  EXPECT_EQ(basis.m(), 12 + 36);
}

TEST(Pauli, DenseMatchesKroneckerOracle) {
  const auto lattice = gl::LatticeSpec::chain(3);
  const auto basis = gl::enumerate_basis(lattice, 3);
  for (const auto& op : basis.ops) {
    const auto dense = gl::to_dense(op, lattice);
    const auto ref = oracle::embed(3, op.support, letters_of(op));
    EXPECT_LT((dense - ref).cwiseAbs().maxCoeff(), 1e-15) << op.label();
  }
}

TEST(Pauli, CommutationMatchesDense) {
  const auto lattice = gl::LatticeSpec::chain(3);
  const auto basis = gl::enumerate_basis(lattice, 2);
  for (const auto& a : basis.ops)
    for (const auto& b : basis.ops) {
      const auto da = oracle::embed(3, a.support, letters_of(a));
      const auto db = oracle::embed(3, b.support, letters_of(b));
      const bool dense_commute = (da * db - db * da).cwiseAbs().maxCoeff() < 1e-12;
      EXPECT_EQ(a.pauli(3).commutes_with(b.pauli(3)), dense_commute) << a.label() << " " << b.label();
    }
}

TEST(Pauli, TraceAndLeftMultiply) {
  gl::Rng rng(3);
  const auto basis = gl::enumerate_basis(gl::LatticeSpec::chain(3), 2);
  const gl::MatrixXc m = rng.ginibre(8, 8);
  for (const auto& op : basis.ops) {
    const auto ref = oracle::embed(3, op.support, letters_of(op));
    EXPECT_LT(std::abs(gl::pauli_trace(op.pauli(3), m) - (ref * m).trace()), 1e-12);
    EXPECT_LT((gl::pauli_left_multiply(op.pauli(3), m) - ref * m).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Hamiltonian, CoefficientRoundTrip) {
  gl::Rng rng(11);
  for (int n : {2, 3, 4}) {
    auto basis = std::make_shared<const gl::OperatorBasis>(gl::enumerate_basis(gl::LatticeSpec::chain(n), 2));
    const gl::VectorXd mu = rng.uniform_vector(basis->m(), -1, 1);
    const gl::HamiltonianModel model(basis, mu);
    const auto h = gl::assemble_hamiltonian(model);
    EXPECT_TRUE(gl::is_hermitian(h, 1e-14));
    const gl::VectorXd back = gl::recover_coefficients(*basis, h);
    EXPECT_LT((back - mu).norm(), 1e-10 * mu.norm());
  }
}

TEST(Hamiltonian, AssembleMatchesKroneckerSum) {
  gl::Rng rng(12);
  const auto basis = gl::enumerate_basis(gl::LatticeSpec::chain(3), 2);
  const gl::VectorXd mu = rng.uniform_vector(basis.m(), -1, 1);
  oracle::Mat ref = oracle::Mat::Zero(8, 8);
  for (int l = 0; l < basis.m(); ++l) ref += mu(l) * oracle::embed(3, basis.ops[l].support, letters_of(basis.ops[l]));
  EXPECT_LT((gl::assemble_operator(basis, mu) - ref).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Hamiltonian, RejectsOutOfRangeCoefficients) {
  auto basis = std::make_shared<const gl::OperatorBasis>(gl::enumerate_basis(gl::LatticeSpec::chain(2), 1));
  gl::VectorXd mu = gl::VectorXd::Zero(6);
  mu(2) = 1.5;
  EXPECT_THROW(gl::HamiltonianModel(basis, mu), gl::Error);
  EXPECT_THROW(gl::HamiltonianModel(basis, gl::VectorXd::Zero(5)), gl::Error);
}

TEST(Hamiltonian, JsonRoundTrip) {
  gl::Rng rng(5);
  auto basis = std::make_shared<const gl::OperatorBasis>(gl::enumerate_basis(gl::LatticeSpec::chain(3), 2));
  const gl::HamiltonianModel model(basis, rng.uniform_vector(basis->m(), -1, 1));
  const auto back = gl::model_from_json(nlohmann::json::parse(gl::model_to_json(model).dump()));
  EXPECT_EQ(back.mu(), model.mu());
  EXPECT_EQ(back.basis().lattice, model.basis().lattice);
}

TEST(Lattice, DistancesAndBalls) {
  const auto open = gl::LatticeSpec::chain(6);
  const auto ring = gl::LatticeSpec::chain(6, true);
  EXPECT_EQ(open.distance(0, 5), 5);
  EXPECT_EQ(ring.distance(0, 5), 1);
  EXPECT_EQ(open.ball(1, 0), (std::vector<int>{0, 1}));
  EXPECT_EQ(ring.ball(1, 0), (std::vector<int>{0, 1, 5}));
  gl::LatticeSpec sq{{3, 3}, false, 2};
  EXPECT_EQ(sq.distance(0, 8), 4);
}

TEST(Lattice, DenseCapFromEnvironment) {
  ::setenv("GIBBSLEARN_DENSE_CAP", "3", 1);
  EXPECT_EQ(gl::dense_cap(), 3);
  EXPECT_THROW(gl::assemble_operator(gl::enumerate_basis(gl::LatticeSpec::chain(4), 1), gl::VectorXd::Zero(12)),
               gl::Error);
  ::unsetenv("GIBBSLEARN_DENSE_CAP");
  EXPECT_EQ(gl::dense_cap(), gl::kDefaultDenseCap);
}
