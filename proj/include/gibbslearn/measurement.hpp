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
 * @file measurement.hpp
 * Simulated estimation of the basis marginals from N copies of a Gibbs
 * state.
 *
 * A plan partitions the basis into mutually commuting groups. Each copy is
 * spent on one group: the group is measured jointly in its common eigenbasis
 * and every member records its +/-1 outcome. Copies are never reused across
 * groups.
 */

#ifndef GIBBSLEARN_MEASUREMENT_HPP
#define GIBBSLEARN_MEASUREMENT_HPP

#include "gibbslearn/common.hpp"
#include "gibbslearn/gibbs.hpp"
#include "gibbslearn/lattice.hpp"
#include "gibbslearn/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace gibbslearn {

enum class Scheme { direct, grouped, exact };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::direct: return "direct";
    case Scheme::grouped: return "grouped";
    case Scheme::exact: return "exact";
  }
  return "unknown";
}

inline Scheme parse_scheme(const std::string& name) {
  if (name == "direct") return Scheme::direct;
  if (name == "grouped") return Scheme::grouped;
  if (name == "exact") return Scheme::exact;
  throw Error("unknown scheme '" + name + "' (expected direct, grouped or exact)");
}

struct MeasurementPlan {
  Scheme scheme = Scheme::exact;
  std::vector<std::vector<int>> groups;
  long shots_per_group = 0;

  long copies() const { return shots_per_group * static_cast<long>(groups.size()); }
};

/// Greedy colouring of the anticommutation graph. Vertices are visited by
/// descending degree, ties by index; each takes the smallest colour unused by
/// its neighbours.
inline std::vector<std::vector<int>> commuting_groups(const OperatorBasis& basis) {
  const int n = basis.num_sites();
  const int m = basis.m();
  std::vector<PauliString> paulis;
  paulis.reserve(m);
  for (const auto& op : basis.ops) paulis.push_back(op.pauli(n));

  std::vector<std::vector<int>> neighbours(m);
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if (!paulis[a].commutes_with(paulis[b])) {
        neighbours[a].push_back(b);
        neighbours[b].push_back(a);
      }

  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return neighbours[a].size() > neighbours[b].size();
  });

  std::vector<int> colour(m, -1);
  int colours = 0;
  for (int v : order) {
    std::vector<bool> used(colours + 1, false);
    for (int u : neighbours[v])
      if (colour[u] >= 0) used[colour[u]] = true;
    int c = 0;
    while (used[c]) ++c;
    colour[v] = c;
    colours = std::max(colours, c + 1);
  }

  std::vector<std::vector<int>> groups(colours);
  for (int v = 0; v < m; ++v) groups[colour[v]].push_back(v);
  return groups;
}

inline MeasurementPlan build_plan(const OperatorBasis& basis, Scheme scheme, long copies) {
  MeasurementPlan plan;
  plan.scheme = scheme;
  if (scheme == Scheme::exact) return plan;

  if (scheme == Scheme::direct) {
    for (int l = 0; l < basis.m(); ++l) plan.groups.push_back({l});
  } else {
    plan.groups = commuting_groups(basis);
  }

  const int n = basis.num_sites();
  for (const auto& g : plan.groups)
    for (std::size_t a = 0; a < g.size(); ++a)
      for (std::size_t b = a + 1; b < g.size(); ++b)
        if (!basis.ops[g[a]].pauli(n).commutes_with(basis.ops[g[b]].pauli(n)))
          throw Error("measurement group contains non-commuting operators");

  const long groups = static_cast<long>(plan.groups.size());
  if (copies < groups)
    throw Error("copy budget too small: N=" + std::to_string(copies) + " gives less than one shot for each of " +
                std::to_string(groups) + " groups");
  plan.shots_per_group = copies / groups;
  return plan;
}

/// Confidence half-width for the mean of `shots` i.i.d. +/-1 outcomes,
/// union-bounded over m marginals: sqrt(2 log(2m / delta_fail) / shots).
inline double hoeffding_radius(long shots, int m, double delta_fail) {
  if (shots <= 0) return 0.0;
  return std::sqrt(2.0 * std::log(2.0 * m / delta_fail) / static_cast<double>(shots));
}

struct MarginalEstimates {
  VectorXd e_hat;
  VectorXd delta;
  std::vector<long> shots;
  long n_total = 0;
  std::uint64_t seed = 0;
  double delta_fail = 0.05;
  Scheme scheme = Scheme::exact;

  double delta_max() const { return delta.size() ? delta.maxCoeff() : 0.0; }
};

namespace detail {

/// One outcome class of a commuting group: an orthonormal basis of the joint
/// eigenspace, and the +/-1 eigenvalue of each member on it.
struct JointEigenspace {
  MatrixXc basis;
  std::vector<int> signs;
};

/// Refines the full space member by member; each member preserves the blocks
/// of the previous ones and has eigenvalues exactly +/-1.
inline std::vector<JointEigenspace> joint_eigenspaces(const std::vector<PauliString>& members,
                                                      Eigen::Index dim) {
  std::vector<JointEigenspace> blocks{{MatrixXc::Identity(dim, dim), {}}};
  for (const auto& p : members) {
    std::vector<JointEigenspace> next;
    for (auto& block : blocks) {
      const MatrixXc restricted = block.basis.adjoint() * pauli_left_multiply(p, block.basis);
      Eigen::SelfAdjointEigenSolver<MatrixXc> solver(hermitian_part(restricted));
      std::vector<Eigen::Index> minus;
      std::vector<Eigen::Index> plus;
      for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
        const double ev = solver.eigenvalues()(k);
        if (std::abs(std::abs(ev) - 1.0) > 1e-8)
          throw Error("group members do not share an eigenbasis");
        (ev < 0.0 ? minus : plus).push_back(k);
      }
      for (int sign : {-1, 1}) {
        const auto& cols = sign < 0 ? minus : plus;
        if (cols.empty()) continue;
        JointEigenspace child;
        child.basis.resize(dim, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c)
          child.basis.col(static_cast<Eigen::Index>(c)) = block.basis * solver.eigenvectors().col(cols[c]);
        child.signs = block.signs;
        child.signs.push_back(sign);
        next.push_back(std::move(child));
      }
    }
    blocks = std::move(next);
  }
  return blocks;
}

}  // namespace detail

/// Deterministic in (plan, rho, seed). Group g draws from substream
/// derive_seed(seed, g).
inline MarginalEstimates sample_outcomes(const MeasurementPlan& plan, const OperatorBasis& basis,
                                         const GibbsEnsemble& ens, std::uint64_t seed,
                                         double delta_fail = 0.05) {
  if (!(delta_fail > 0.0 && delta_fail < 1.0)) throw Error("failure probability must lie in (0, 1)");
  const int n = basis.num_sites();
  const int m = basis.m();
  if (hilbert_dim(n) != ens.dim()) throw Error("plan and ensemble dimensions differ");

  MarginalEstimates est;
  est.seed = seed;
  est.delta_fail = delta_fail;
  est.scheme = plan.scheme;
  est.e_hat = VectorXd::Zero(m);
  est.delta = VectorXd::Zero(m);
  est.shots.assign(m, 0);

  if (plan.scheme == Scheme::exact) {
    est.e_hat = marginals(basis, ens);
    return est;
  }

  const MatrixXc rho = ens.density();
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    const auto& members = plan.groups[g];
    std::vector<PauliString> paulis;
    for (int l : members) paulis.push_back(basis.ops[l].pauli(n));
    const auto blocks = detail::joint_eigenspaces(paulis, ens.dim());

    std::vector<double> probs;
    probs.reserve(blocks.size());
    for (const auto& b : blocks)
      probs.push_back(std::max(0.0, (b.basis.adjoint() * rho * b.basis).trace().real()));

    CategoricalSampler sampler(probs);
    Rng rng(derive_seed(seed, g));
    std::vector<long> counts(blocks.size(), 0);
    for (long s = 0; s < plan.shots_per_group; ++s) ++counts[sampler(rng)];

    for (std::size_t k = 0; k < members.size(); ++k) {
      long total = 0;
      for (std::size_t b = 0; b < blocks.size(); ++b) total += counts[b] * blocks[b].signs[k];
      const int l = members[k];
      est.e_hat(l) = static_cast<double>(total) / static_cast<double>(plan.shots_per_group);
      est.shots[l] = plan.shots_per_group;
      est.delta(l) = hoeffding_radius(plan.shots_per_group, m, delta_fail);
    }
    est.n_total += plan.shots_per_group;
  }
  return est;
}

/// Marginal accuracy that keeps the parameter error below epsilon for an
/// alpha-strongly-convex log-partition function: alpha eps / (2 beta sqrt(m)).
inline double required_delta(double epsilon, double alpha, double beta, int m) {
  if (!(alpha > 0.0)) throw Error("non-strongly-convex regime");
  if (!(epsilon > 0.0) || !(beta > 0.0) || m <= 0)
    throw Error("epsilon, beta and m must be positive");
  return alpha * epsilon / (2.0 * beta * std::sqrt(static_cast<double>(m)));
}

inline void write_estimates_csv(std::ostream& out, const MarginalEstimates& est) {
  out << "index,e_hat,delta,shots\n";
  for (Eigen::Index l = 0; l < est.e_hat.size(); ++l)
    out << l << ',' << format_double(est.e_hat(l)) << ',' << format_double(est.delta(l)) << ','
        << est.shots[static_cast<std::size_t>(l)] << '\n';
}

inline nlohmann::json estimates_manifest(const MarginalEstimates& est) {
  return {{"seed", est.seed},
          {"scheme", to_string(est.scheme)},
          {"N_total", est.n_total},
          {"delta_fail", est.delta_fail}};
}

}  // namespace gibbslearn

#endif  // GIBBSLEARN_MEASUREMENT_HPP
