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
 * @file experiment.hpp
 * Command layer behind the gibbslearn tool.
 *
 * Every command goes through the same path: the raw JSON config is resolved
 * into a canonical config with all defaults filled in, the command runs
 * against an output directory, and a manifest recording the canonical config
 * is written next to the outputs. Replaying a manifest reruns the command
 * from that config and compares the recorded outputs byte for byte.
 */

#ifndef GIBBSLEARN_EXPERIMENT_HPP
#define GIBBSLEARN_EXPERIMENT_HPP

#include "gibbslearn/common.hpp"
#include "gibbslearn/gibbs.hpp"
#include "gibbslearn/lab.hpp"
#include "gibbslearn/lattice.hpp"
#include "gibbslearn/maxent.hpp"
#include "gibbslearn/measurement.hpp"
#include "gibbslearn/qbp.hpp"
#include "gibbslearn/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace gibbslearn {

#ifndef GIBBSLEARN_VERSION
#define GIBBSLEARN_VERSION "0.0.0"
#endif

inline constexpr const char* kToolName = "gibbslearn";
inline constexpr const char* kToolVersion = GIBBSLEARN_VERSION;

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config validation

/// Collects every offending field before failing.
class ConfigErrors {
 public:
  void add(const std::string& field, const std::string& problem) {
    items_.push_back(field + ": " + problem);
  }
  bool empty() const { return items_.empty(); }

  void raise(const std::string& what) const {
    if (items_.empty()) return;
    std::string msg = "invalid " + what + " config: ";
    for (std::size_t k = 0; k < items_.size(); ++k) msg += (k ? "; " : "") + items_[k];
    throw Error(msg);
  }

 private:
  std::vector<std::string> items_;
};

namespace detail {

inline std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline std::optional<double> read_number(const json& j, const std::string& key, const std::string& path,
                                         ConfigErrors& errs) {
  if (!j.contains(key)) return std::nullopt;
  if (!j.at(key).is_number()) {
    errs.add(path, "must be a number");
    return std::nullopt;
  }
  return j.at(key).get<double>();
}

inline std::optional<long> read_integer(const json& j, const std::string& key, const std::string& path,
                                        ConfigErrors& errs) {
  if (!j.contains(key)) return std::nullopt;
  const json& v = j.at(key);
  if (v.is_number_integer()) return v.get<long>();
  if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() &&
      std::abs(v.get<double>()) < 9e15)
    return static_cast<long>(v.get<double>());
  errs.add(path, "must be an integer");
  return std::nullopt;
}

inline std::optional<std::uint64_t> read_seed(const json& j, const std::string& key,
                                              const std::string& path, ConfigErrors& errs) {
  if (!j.contains(key)) return std::nullopt;
  const json& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  errs.add(path, "must be a nonnegative integer");
  return std::nullopt;
}

inline std::optional<std::string> read_string(const json& j, const std::string& key,
                                              const std::string& path, ConfigErrors& errs) {
  if (!j.contains(key)) return std::nullopt;
  if (!j.at(key).is_string()) {
    errs.add(path, "must be a string");
    return std::nullopt;
  }
  return j.at(key).get<std::string>();
}

inline std::optional<bool> read_bool(const json& j, const std::string& key, const std::string& path,
                                     ConfigErrors& errs) {
  if (!j.contains(key)) return std::nullopt;
  if (!j.at(key).is_boolean()) {
    errs.add(path, "must be true or false");
    return std::nullopt;
  }
  return j.at(key).get<bool>();
}

inline std::optional<std::vector<double>> read_number_list(const json& j, const std::string& key,
                                                           const std::string& path, ConfigErrors& errs) {
  if (!j.contains(key)) return std::nullopt;
  const json& v = j.at(key);
  if (!v.is_array() || v.empty()) {
    errs.add(path, "must be a nonempty array of numbers");
    return std::nullopt;
  }
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) {
      errs.add(path, "must be a nonempty array of numbers");
      return std::nullopt;
    }
    out.push_back(x.get<double>());
  }
  return out;
}

inline void reject_unknown(const json& j, const std::vector<std::string>& known, const std::string& prefix,
                           ConfigErrors& errs) {
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      errs.add(join_path(prefix, key), "unknown field");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Instances

/// Either "random(SEED)" / "random(SEED, dist=uniform[LO,HI])" or an explicit
/// coefficient list.
struct MuSpec {
  bool random = true;
  std::uint64_t seed = 0;
  double lo = -1.0;
  double hi = 1.0;
  std::vector<double> values;

  json to_json() const {
    if (!random) return values;
    return "random(" + std::to_string(seed) + ", dist=uniform[" + format_double(lo) + "," +
           format_double(hi) + "])";
  }

  VectorXd draw(int m) const {
    if (!random) {
      if (static_cast<int>(values.size()) != m)
        throw Error("mu has " + std::to_string(values.size()) + " entries but the basis has m=" +
                    std::to_string(m));
      return Eigen::Map<const VectorXd>(values.data(), m);
    }
    Rng rng(seed);
    return rng.uniform_vector(m, lo, hi);
  }
};

inline std::optional<MuSpec> parse_mu(const json& v, const std::string& path, ConfigErrors& errs) {
  MuSpec spec;
  if (v.is_string()) {
    static const std::regex pattern(
        R"(^\s*random\(\s*(\d+)\s*(?:,\s*dist\s*=\s*uniform\s*\[\s*([^,\]\s]+)\s*,\s*([^\]\s]+)\s*\]\s*)?\)\s*$)");
    std::smatch match;
    const std::string text = v.get<std::string>();
    if (!std::regex_match(text, match, pattern)) {
      errs.add(path, "expected \"random(SEED, dist=uniform[LO,HI])\" or an array");
      return std::nullopt;
    }
    try {
      spec.seed = std::stoull(match[1].str());
      if (match[2].matched) {
        spec.lo = std::stod(match[2].str());
        spec.hi = std::stod(match[3].str());
      }
    } catch (const std::exception&) {
      errs.add(path, "unparseable number in random spec");
      return std::nullopt;
    }
    if (!(spec.lo >= -1.0 && spec.hi <= 1.0 && spec.lo <= spec.hi)) {
      errs.add(path, "uniform range must satisfy -1 <= LO <= HI <= 1");
      return std::nullopt;
    }
    return spec;
  }
  if (v.is_array()) {
    spec.random = false;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number()) {
        errs.add(path + "[" + std::to_string(k) + "]", "must be a number");
        return std::nullopt;
      }
      const double x = v[k].get<double>();
      if (!(std::abs(x) <= 1.0)) errs.add(path + "[" + std::to_string(k) + "]", "outside [-1, 1]");
      spec.values.push_back(x);
    }
    return spec;
  }
  errs.add(path, "must be a random spec string or an array of numbers");
  return std::nullopt;
}

struct InstanceConfig {
  LatticeSpec lattice;
  int kappa = 2;
  double beta = 1.0;
  MuSpec mu;

  json to_json() const {
    return {{"lattice", lattice}, {"kappa", kappa}, {"beta", beta}, {"mu", mu.to_json()}};
  }

  HamiltonianModel model() const {
    auto basis = std::make_shared<const OperatorBasis>(enumerate_basis(lattice, kappa));
    return HamiltonianModel(basis, mu.draw(basis->m()));
  }
};

/// `lattice` is an integer (open chain) or {sides, periodic}.
inline std::optional<LatticeSpec> parse_lattice(const json& v, const std::string& path, ConfigErrors& errs) {
  if (v.is_number_integer()) {
    const int n = v.get<int>();
    if (n < 1) {
      errs.add(path, "chain length must be positive");
      return std::nullopt;
    }
    return LatticeSpec::chain(n);
  }
  if (!v.is_object()) {
    errs.add(path, "must be a chain length or an object {sides, periodic}");
    return std::nullopt;
  }
  try {
    return v.get<LatticeSpec>();
  } catch (const std::exception& e) {
    errs.add(path, e.what());
    return std::nullopt;
  }
}

inline std::optional<InstanceConfig> parse_instance(const json& j, const std::string& prefix,
                                                    ConfigErrors& errs, bool require_mu = true) {
  if (!j.is_object()) {
    errs.add(prefix.empty() ? "config" : prefix, "must be an object");
    return std::nullopt;
  }
  detail::reject_unknown(j, {"lattice", "kappa", "beta", "mu"}, prefix, errs);
  InstanceConfig inst;
  bool ok = true;
  if (!j.contains("lattice")) {
    errs.add(detail::join_path(prefix, "lattice"), "missing");
    ok = false;
  } else if (auto l = parse_lattice(j.at("lattice"), detail::join_path(prefix, "lattice"), errs)) {
    inst.lattice = *l;
  } else {
    ok = false;
  }
  if (auto k = detail::read_integer(j, "kappa", detail::join_path(prefix, "kappa"), errs)) {
    if (*k < 1) {
      errs.add(detail::join_path(prefix, "kappa"), "must be at least 1");
      ok = false;
    }
    inst.kappa = static_cast<int>(*k);
  } else if (!j.contains("kappa")) {
    errs.add(detail::join_path(prefix, "kappa"), "missing");
    ok = false;
  } else {
    ok = false;
  }
  if (auto b = detail::read_number(j, "beta", detail::join_path(prefix, "beta"), errs)) {
    if (!(*b > 0.0) || !std::isfinite(*b)) {
      errs.add(detail::join_path(prefix, "beta"), "must be a positive finite number");
      ok = false;
    }
    inst.beta = *b;
  } else if (!j.contains("beta")) {
    errs.add(detail::join_path(prefix, "beta"), "missing");
    ok = false;
  } else {
    ok = false;
  }
  if (j.contains("mu")) {
    if (auto mu = parse_mu(j.at("mu"), detail::join_path(prefix, "mu"), errs)) inst.mu = *mu;
    else ok = false;
  } else if (require_mu) {
    errs.add(detail::join_path(prefix, "mu"), "missing");
    ok = false;
  }
  if (ok && inst.kappa > inst.lattice.num_sites())
    errs.add(detail::join_path(prefix, "kappa"), "locality exceeds system size");
  if (ok && !inst.mu.random) {
    try {
      const int m = enumerate_basis(inst.lattice, inst.kappa).m();
      if (static_cast<int>(inst.mu.values.size()) != m)
        errs.add(detail::join_path(prefix, "mu"), "has " + std::to_string(inst.mu.values.size()) +
                                                      " entries, basis has m=" + std::to_string(m));
    } catch (const std::exception& e) {
      errs.add(prefix.empty() ? "lattice" : prefix, e.what());
    }
  }
  if (!ok) return std::nullopt;
  return inst;
}

/// Model file: {lattice, kappa, beta, mu: [...]}.
struct ModelFile {
  HamiltonianModel model;
  double beta = 1.0;

  json to_json() const {
    json j = model_to_json(model);
    j["beta"] = beta;
    return j;
  }
};

inline ModelFile model_file_from_json(const json& j, const std::string& prefix = "model") {
  ConfigErrors errs;
  auto inst = parse_instance(j, prefix, errs);
  errs.raise("model");
  return {inst->model(), inst->beta};
}

// ---------------------------------------------------------------------------
// Files and manifests

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << body;
  if (!out) throw Error("failed writing " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunContext {
  std::filesystem::path out_dir = ".";
  int jobs = 1;
  std::ostream* log = &std::cout;
};

struct CommandResult {
  int exit_code = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;         // deterministic, compared on replay
  std::vector<std::string> timing_outputs;  // wall-clock data, never compared
  std::vector<std::uint64_t> trial_seeds;
  json summary = json::object();
};

inline json make_manifest(const std::string& command, const json& config, const CommandResult& result,
                          const std::string& started, const std::string& finished) {
  return {{"tool", kToolName},
          {"version", kToolVersion},
          {"command", command},
          {"config", config},
          {"seed", result.seed},
          {"started", started},
          {"finished", finished},
          {"outputs", result.outputs},
          {"timing_outputs", result.timing_outputs},
          {"trial_seeds", result.trial_seeds},
          {"exit_code", result.exit_code}};
}

// ---------------------------------------------------------------------------
// gen

inline json resolve_gen_config(const json& raw, std::optional<std::uint64_t> seed_override) {
  ConfigErrors errs;
  auto inst = parse_instance(raw, "", errs);
  errs.raise("gen");
  if (seed_override && inst->mu.random) inst->mu.seed = *seed_override;
  return inst->to_json();
}

inline CommandResult cmd_gen(const json& config, const RunContext& ctx) {
  ConfigErrors errs;
  const auto inst = parse_instance(config, "", errs);
  errs.raise("gen");
  const ModelFile file{inst->model(), inst->beta};
  write_file(ctx.out_dir / "model.json", file.to_json().dump(2) + "\n");
  CommandResult r;
  r.seed = inst->mu.random ? inst->mu.seed : 0;
  r.outputs = {"model.json"};
  r.summary = {{"n", file.model.num_sites()}, {"m", file.model.m()}};
  *ctx.log << "n=" << file.model.num_sites() << " m=" << file.model.m() << "\n";
  return r;
}

// ---------------------------------------------------------------------------
// learn

struct LearnOutcome {
  MarginalEstimates estimates;
  SolveResult solution;
  double error_l2 = 0.0;
  double alpha_truth = 0.0;
  double alpha_segment = 0.0;
  std::optional<double> bound;
  std::size_t groups = 0;
  double solve_seconds = 0.0;
};

/// Measurement, solve and error analysis for one model. alpha_segment is the
/// smallest Hessian eigenvalue over 11 points of the segment [mu*, mu_hat].
inline LearnOutcome learn_once(const HamiltonianModel& model, double beta, Scheme scheme, long copies,
                               std::uint64_t seed, double delta_fail, const SolverConfig& solver) {
  const OperatorBasis& basis = model.basis();
  const GibbsEnsemble ens = thermal_state(model, beta);
  const MeasurementPlan plan = build_plan(basis, scheme, copies);
  LearnOutcome out;
  out.groups = plan.groups.size();
  out.estimates = sample_outcomes(plan, basis, ens, seed, delta_fail);
  const auto t0 = std::chrono::steady_clock::now();
  out.solution = solve(out.estimates, beta, basis, solver);
  out.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.error_l2 = (out.solution.mu_hat - model.mu()).norm();
  out.alpha_truth = hessian_logZ(basis, model.mu(), beta).min_eigenvalue;
  out.alpha_segment = segment_min_eigenvalue(basis, model.mu(), out.solution.mu_hat, beta);
  if (out.alpha_segment > 0.0)
    out.bound = error_bound(out.estimates.delta_max(), out.alpha_segment, beta, basis.m());
  return out;
}

inline json resolve_learn_config(const json& raw, std::optional<std::uint64_t> seed_override) {
  ConfigErrors errs;
  if (!raw.is_object()) throw Error("invalid learn config: config: must be an object");
  detail::reject_unknown(raw, {"model", "copies", "scheme", "seed", "delta_fail", "solver"}, "", errs);
  json out;
  if (!raw.contains("model")) {
    errs.add("model", "missing (pass --model FILE or embed the model)");
  } else {
    auto inst = parse_instance(raw.at("model"), "model", errs);
    if (inst) {
      json m = inst->to_json();
      if (inst->mu.random) {
        const VectorXd mu = inst->mu.draw(enumerate_basis(inst->lattice, inst->kappa).m());
        m["mu"] = std::vector<double>(mu.begin(), mu.end());
      }
      out["model"] = m;
    }
  }
  const std::string scheme = detail::read_string(raw, "scheme", "scheme", errs).value_or("grouped");
  try {
    parse_scheme(scheme);
  } catch (const Error& e) {
    errs.add("scheme", e.what());
  }
  out["scheme"] = scheme;
  const auto copies = detail::read_integer(raw, "copies", "copies", errs);
  if (scheme != "exact") {
    if (!copies) errs.add("copies", "missing (required unless scheme is exact)");
    else if (*copies < 1) errs.add("copies", "must be positive");
  }
  out["copies"] = copies.value_or(0);
  out["seed"] = seed_override.value_or(detail::read_seed(raw, "seed", "seed", errs).value_or(0));
  const double delta_fail = detail::read_number(raw, "delta_fail", "delta_fail", errs).value_or(0.05);
  if (!(delta_fail > 0.0 && delta_fail < 1.0)) errs.add("delta_fail", "must lie in (0, 1)");
  out["delta_fail"] = delta_fail;
  try {
    out["solver"] = solver_config_to_json(solver_config_from_json(raw.value("solver", json::object())));
  } catch (const std::exception& e) {
    errs.add("solver", e.what());
  }
  errs.raise("learn");
  return out;
}

inline CommandResult cmd_learn(const json& config, const RunContext& ctx) {
  const ModelFile file = model_file_from_json(config.at("model"));
  const Scheme scheme = parse_scheme(config.at("scheme").get<std::string>());
  const long copies = config.at("copies").get<long>();
  const auto seed = config.at("seed").get<std::uint64_t>();
  const double delta_fail = config.at("delta_fail").get<double>();
  const SolverConfig solver = solver_config_from_json(config.at("solver"));

  LearnOutcome o = learn_once(file.model, file.beta, scheme, copies, seed, delta_fail, solver);
  CommandResult r;
  r.seed = seed;

  std::ostringstream est_csv;
  write_estimates_csv(est_csv, o.estimates);
  write_file(ctx.out_dir / "estimates.csv", est_csv.str());
  std::ostringstream trace_csv;
  write_trace_csv(trace_csv, o.solution.trace);
  const auto trace_path = ctx.out_dir / "trace.csv";
  write_file(trace_path, trace_csv.str());
  r.outputs = {"estimates.csv", "trace.csv"};

  if (!o.solution.trace.converged)
    throw Error("solver did not converge after " + std::to_string(o.solution.trace.iterations) +
                " iterations (projected gradient " + format_double(o.solution.trace.final_grad_norm) +
                "); trace: " + trace_path.string());

  json result{{"n", file.model.num_sites()},
              {"m", file.model.m()},
              {"beta", file.beta},
              {"scheme", to_string(scheme)},
              {"groups", o.groups},
              {"copies_used", o.estimates.n_total},
              {"delta_max", o.estimates.delta_max()},
              {"error_l2", o.error_l2},
              {"iterations", o.solution.trace.iterations},
              {"converged", o.solution.trace.converged},
              {"final_grad_norm", o.solution.trace.final_grad_norm},
              {"alpha_truth", o.alpha_truth},
              {"alpha_segment", o.alpha_segment},
              {"mu_hat", std::vector<double>(o.solution.mu_hat.begin(), o.solution.mu_hat.end())}};
  if (o.bound) {
    result["bound"] = *o.bound;
    if (scheme != Scheme::exact) result["bound_holds"] = o.error_l2 <= *o.bound;
  }
  result["estimates_manifest"] = estimates_manifest(o.estimates);
  write_file(ctx.out_dir / "result.json", result.dump(2) + "\n");
  write_file(ctx.out_dir / "timing.json",
             json{{"solve_seconds", o.solve_seconds}, {"solver_wall_seconds", o.solution.trace.wall_seconds}}
                     .dump(2) +
                 "\n");
  r.outputs.push_back("result.json");
  r.timing_outputs = {"timing.json"};
  r.summary = result;
  *ctx.log << "m=" << file.model.m() << " scheme=" << to_string(scheme)
           << " copies=" << o.estimates.n_total << " delta_max=" << format_double(o.estimates.delta_max())
           << " iterations=" << o.solution.trace.iterations << " error_l2=" << format_double(o.error_l2);
  if (o.bound) *ctx.log << " bound=" << format_double(*o.bound);
  *ctx.log << "\n";
  return r;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepCell {
  int n = 0;
  LatticeSpec lattice;
  double beta = 0.0;
  long copies = 0;
};

struct SweepRow {
  long trial = 0;
  int n = 0;
  int m = 0;
  double beta = 0.0;
  long copies = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  double delta_max = 0.0;
  double alpha = 0.0;
  double error_l2 = 0.0;
  std::optional<double> bound;
  std::string bound_holds = "na";
  long iterations = 0;
  bool converged = false;
  double seconds = 0.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

/// Least-squares slope and intercept of y against x.
inline std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("line fit needs at least two points");
  const double nx = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k], sy += y[k], sxx += x[k] * x[k], sxy += x[k] * y[k];
  }
  const double denom = nx * sxx - sx * sx;
  if (denom == 0.0) throw Error("line fit needs distinct abscissae");
  const double slope = (nx * sxy - sx * sy) / denom;
  return {slope, (sy - slope * sx) / nx};
}

inline json resolve_sweep_config(const json& raw, std::optional<std::uint64_t> seed_override) {
  ConfigErrors errs;
  if (!raw.is_object()) throw Error("invalid sweep config: config: must be an object");
  detail::reject_unknown(raw, {"instance", "grid", "trials", "scheme", "seed", "delta_fail", "solver",
                               "resample_model", "copies"},
                         "", errs);
  json out;
  std::optional<InstanceConfig> inst;
  if (!raw.contains("instance")) errs.add("instance", "missing");
  else inst = parse_instance(raw.at("instance"), "instance", errs);
  if (inst) out["instance"] = inst->to_json();

  json grid = json::object();
  const json raw_grid = raw.value("grid", json::object());
  if (!raw_grid.is_object()) {
    errs.add("grid", "must be an object");
  } else {
    detail::reject_unknown(raw_grid, {"N", "beta", "n"}, "grid", errs);
    if (auto v = detail::read_number_list(raw_grid, "N", "grid.N", errs)) {
      for (double x : *v)
        if (!(x >= 1.0) || std::floor(x) != x) errs.add("grid.N", "entries must be positive integers");
      grid["N"] = *v;
    }
    if (auto v = detail::read_number_list(raw_grid, "beta", "grid.beta", errs)) {
      for (double x : *v)
        if (!(x > 0.0)) errs.add("grid.beta", "entries must be positive");
      grid["beta"] = *v;
    }
    if (auto v = detail::read_number_list(raw_grid, "n", "grid.n", errs)) {
      for (double x : *v)
        if (!(x >= 1.0) || std::floor(x) != x) errs.add("grid.n", "entries must be positive integers");
      grid["n"] = *v;
      if (inst && !inst->mu.random) errs.add("grid.n", "requires a random mu spec");
    }
  }
  const std::string scheme = detail::read_string(raw, "scheme", "scheme", errs).value_or("grouped");
  try {
    parse_scheme(scheme);
  } catch (const Error& e) {
    errs.add("scheme", e.what());
  }
  if (!grid.contains("N")) {
    if (auto c = detail::read_integer(raw, "copies", "copies", errs)) grid["N"] = {static_cast<double>(*c)};
    else if (scheme != "exact") errs.add("grid.N", "missing (or give copies)");
    else grid["N"] = {0.0};
  }
  out["grid"] = grid;
  out["scheme"] = scheme;
  const long trials = detail::read_integer(raw, "trials", "trials", errs).value_or(1);
  if (trials < 1) errs.add("trials", "must be positive");
  out["trials"] = trials;
  out["seed"] = seed_override.value_or(detail::read_seed(raw, "seed", "seed", errs).value_or(0));
  const double delta_fail = detail::read_number(raw, "delta_fail", "delta_fail", errs).value_or(0.05);
  if (!(delta_fail > 0.0 && delta_fail < 1.0)) errs.add("delta_fail", "must lie in (0, 1)");
  out["delta_fail"] = delta_fail;
  out["resample_model"] = detail::read_bool(raw, "resample_model", "resample_model", errs).value_or(false);
  try {
    out["solver"] = solver_config_to_json(solver_config_from_json(raw.value("solver", json::object())));
  } catch (const std::exception& e) {
    errs.add("solver", e.what());
  }
  errs.raise("sweep");
  return out;
}

/// Cells are the product n x beta x N in that nesting order. Trial t of cell
/// c has id c * trials + t and seed derive_seed(seed, id). With
/// resample_model the coefficients are redrawn per trial from
/// derive_seed(trial seed, 1); otherwise every trial of a cell uses the
/// instance's mu spec. Sampling uses derive_seed(trial seed, 0).
inline CommandResult cmd_sweep(const json& config, const RunContext& ctx) {
  ConfigErrors errs;
  const auto inst = parse_instance(config.at("instance"), "instance", errs);
  errs.raise("sweep");
  const json& grid = config.at("grid");
  const Scheme scheme = parse_scheme(config.at("scheme").get<std::string>());
  const long trials = config.at("trials").get<long>();
  const auto master = config.at("seed").get<std::uint64_t>();
  const double delta_fail = config.at("delta_fail").get<double>();
  const bool resample = config.at("resample_model").get<bool>();
  const SolverConfig solver = solver_config_from_json(config.at("solver"));

  std::vector<int> ns;
  if (grid.contains("n"))
    for (double x : grid.at("n")) ns.push_back(static_cast<int>(x));
  else
    ns.push_back(inst->lattice.num_sites());
  std::vector<double> betas = grid.contains("beta") ? grid.at("beta").get<std::vector<double>>()
                                                    : std::vector<double>{inst->beta};
  std::vector<long> copies;
  for (double x : grid.at("N")) copies.push_back(static_cast<long>(x));

  std::vector<SweepCell> cells;
  for (int n : ns)
    for (double b : betas)
      for (long c : copies)
        cells.push_back({n, grid.contains("n") ? LatticeSpec::chain(n) : inst->lattice, b, c});

  const long total = static_cast<long>(cells.size()) * trials;
  std::vector<SweepRow> rows(static_cast<std::size_t>(total));
  CommandResult r;
  r.seed = master;
  for (long id = 0; id < total; ++id) r.trial_seeds.push_back(derive_seed(master, static_cast<std::uint64_t>(id)));

  auto run_trial = [&](long id) {
    const SweepCell& cell = cells[static_cast<std::size_t>(id / trials)];
    SweepRow& row = rows[static_cast<std::size_t>(id)];
    row.trial = id;
    row.n = cell.lattice.num_sites();
    row.beta = cell.beta;
    row.copies = cell.copies;
    row.seed = r.trial_seeds[static_cast<std::size_t>(id)];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      auto basis = std::make_shared<const OperatorBasis>(enumerate_basis(cell.lattice, inst->kappa));
      row.m = basis->m();
      VectorXd mu;
      if (resample) {
        Rng rng(derive_seed(row.seed, 1));
        mu = rng.uniform_vector(basis->m(), inst->mu.random ? inst->mu.lo : -1.0,
                                inst->mu.random ? inst->mu.hi : 1.0);
      } else {
        mu = inst->mu.draw(basis->m());
      }
      const HamiltonianModel model(basis, mu);
      const LearnOutcome o =
          learn_once(model, cell.beta, scheme, cell.copies, derive_seed(row.seed, 0), delta_fail, solver);
      row.delta_max = o.estimates.delta_max();
      row.alpha = o.alpha_segment;
      row.error_l2 = o.error_l2;
      row.bound = o.bound;
      if (o.bound && scheme != Scheme::exact) row.bound_holds = o.error_l2 <= *o.bound ? "pass" : "fail";
      row.iterations = o.solution.trace.iterations;
      row.converged = o.solution.trace.converged;
      if (!row.converged) row.status = "not_converged";
    } catch (const std::exception& e) {
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      row.status = "error: " + msg;
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const int workers = std::max(1, std::min<int>(ctx.jobs, static_cast<int>(total)));
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (long id = next++; id < total; id = next++) run_trial(id);
    });
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << "trial,n,m,beta,N,seed,status,delta_max,alpha,l2_error,bound,bound_holds,iterations,converged\n";
  std::ostringstream timing;
  timing << "trial,seconds\n";
  long failures = 0;
  long violations = 0;
  for (const auto& row : rows) {
    csv << row.trial << ',' << row.n << ',' << row.m << ',' << format_double(row.beta) << ',' << row.copies
        << ',' << row.seed << ',' << row.status << ',' << format_double(row.delta_max) << ','
        << format_double(row.alpha) << ',' << format_double(row.error_l2) << ','
        << (row.bound ? format_double(*row.bound) : std::string("na")) << ',' << row.bound_holds << ','
        << row.iterations << ',' << (row.converged ? 1 : 0) << '\n';
    timing << row.trial << ',' << format_double(row.seconds) << '\n';
    if (row.status != "ok") ++failures;
    if (row.bound_holds == "fail") ++violations;
  }

  std::ostringstream cells_csv;
  cells_csv << "n,m,beta,N,trials,ok,median_error,median_delta_max,bound_violations\n";
  json fits = json::array();
  std::map<std::pair<int, double>, std::pair<std::vector<double>, std::vector<double>>> curves;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<double> errors;
    std::vector<double> deltas;
    long viol = 0;
    int m = 0;
    for (long t = 0; t < trials; ++t) {
      const SweepRow& row = rows[c * static_cast<std::size_t>(trials) + static_cast<std::size_t>(t)];
      m = std::max(m, row.m);
      if (row.status != "ok") continue;
      errors.push_back(row.error_l2);
      deltas.push_back(row.delta_max);
      if (row.bound_holds == "fail") ++viol;
    }
    const double med = median(errors);
    cells_csv << cells[c].lattice.num_sites() << ',' << m << ',' << format_double(cells[c].beta) << ','
              << cells[c].copies << ',' << trials << ',' << errors.size() << ',' << format_double(med) << ','
              << format_double(median(deltas)) << ',' << viol << '\n';
    if (std::isfinite(med) && med > 0.0 && cells[c].copies > 0) {
      auto& curve = curves[{cells[c].lattice.num_sites(), cells[c].beta}];
      curve.first.push_back(std::log(static_cast<double>(cells[c].copies)));
      curve.second.push_back(std::log(med));
    }
  }
  for (const auto& [key, curve] : curves) {
    if (curve.first.size() < 2) continue;
    const auto [slope, intercept] = fit_line(curve.first, curve.second);
    fits.push_back({{"n", key.first}, {"beta", key.second}, {"slope", slope}, {"intercept", intercept},
                    {"points", curve.first.size()}});
  }

  write_file(ctx.out_dir / "sweep.csv", csv.str());
  write_file(ctx.out_dir / "cells.csv", cells_csv.str());
  const json fit{{"fits", fits}, {"trial_failures", failures}, {"bound_violations", violations}};
  write_file(ctx.out_dir / "fit.json", fit.dump(2) + "\n");
  write_file(ctx.out_dir / "sweep_timing.csv", timing.str());
  r.outputs = {"sweep.csv", "cells.csv", "fit.json"};
  r.timing_outputs = {"sweep_timing.csv"};
  r.summary = fit;
  *ctx.log << "trials=" << total << " failures=" << failures << " bound_violations=" << violations << "\n";
  for (const auto& f : fits)
    *ctx.log << "n=" << f["n"] << " beta=" << f["beta"] << " slope=" << format_double(f["slope"].get<double>())
             << "\n";
  return r;
}

// ---------------------------------------------------------------------------
// lab

struct LabSuite {
  json defaults;
  std::function<CheckReport(const json& params, std::uint64_t seed)> run;
};

namespace detail {

inline OperatorBasis chain_basis(const json& p) {
  return enumerate_basis(LatticeSpec::chain(p.at("n").get<int>()), p.at("kappa").get<int>());
}

/// Random coefficients for instance k of a suite.
inline VectorXd suite_mu(const OperatorBasis& basis, std::uint64_t seed, int k) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
  return rng.uniform_vector(basis.m(), -1.0, 1.0);
}

}  // namespace detail

inline const std::map<std::string, LabSuite>& lab_suites() {
  static const std::map<std::string, LabSuite> suites = {
      {"strong-convexity",
       {{{"n", 3}, {"kappa", 2}, {"betas", {0.2, 1.0, 3.0}}, {"instances", 5}, {"trials", 100}},
        [](const json& p, std::uint64_t seed) {
          const auto basis = detail::chain_basis(p);
          std::vector<CheckReport> parts;
          json alphas = json::array();
          int k = 0;
          for (int i = 0; i < p.at("instances").get<int>(); ++i)
            for (double beta : p.at("betas").get<std::vector<double>>()) {
              auto probe = strong_convexity_probe(basis, detail::suite_mu(basis, seed, i), beta,
                                                  p.at("trials").get<int>(), derive_seed(seed, 1000 + k++));
              alphas.push_back({{"instance", i}, {"beta", beta}, {"min_q_times_m", probe.min_q_times_m}});
              parts.push_back(std::move(probe.report));
            }
          auto merged = CheckReport::merge(parts);
          merged.extra = {{"alpha_times_m", alphas}};
          return merged;
        }}},
      {"infinite-temp",
       {{{"n", 3}, {"kappa", 2}, {"beta", 2.0}, {"instances", 5}, {"trials", 20},
         {"ratio_floor", kInfiniteTempRatioFloor}},
        [](const json& p, std::uint64_t seed) {
          const auto basis = detail::chain_basis(p);
          std::vector<CheckReport> parts;
          for (int i = 0; i < p.at("instances").get<int>(); ++i)
            parts.push_back(infinite_temp_variance_check(basis, detail::suite_mu(basis, seed, i),
                                                         p.at("beta").get<double>(), p.at("trials").get<int>(),
                                                         derive_seed(seed, 1000 + i),
                                                         p.at("ratio_floor").get<double>()));
          return CheckReport::merge(parts);
        }}},
      {"global-to-local",
       {{{"n", 3}, {"trials", 500}},
        [](const json& p, std::uint64_t seed) {
          return global_to_local_suite(p.at("n").get<int>(), p.at("trials").get<int>(), seed);
        }}},
      {"local-variance",
       {{{"n", 3}, {"kappa", 2}, {"beta", 1.0}, {"instances", 5}, {"trials", 20}},
        [](const json& p, std::uint64_t seed) {
          const auto basis = detail::chain_basis(p);
          std::vector<CheckReport> parts;
          for (int i = 0; i < p.at("instances").get<int>(); ++i)
            parts.push_back(local_variance_suite(basis, detail::suite_mu(basis, seed, i), p.at("beta").get<double>(),
                                                 p.at("trials").get<int>(), derive_seed(seed, 1000 + i)));
          return CheckReport::merge(parts);
        }}},
      {"akl",
       {{{"n", 6}, {"operators", 10}, {"gaps", {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}}, {"x_step", 0.25}},
        [](const json& p, std::uint64_t seed) {
          return akl_suite(p.at("n").get<int>(), p.at("operators").get<int>(),
                           p.at("gaps").get<std::vector<double>>(), p.at("x_step").get<double>(), seed);
        }}},
      {"delta-gamma",
       {{{"n", 3}, {"kappa", 2}, {"beta", 1.0}, {"observables", 20}, {"grid_points", 20}},
        [](const json& p, std::uint64_t seed) {
          return delta_gamma_suite(detail::chain_basis(p), p.at("beta").get<double>(),
                                   p.at("observables").get<int>(), p.at("grid_points").get<int>(), seed);
        }}},
      {"local-unitary",
       {{{"n", 3}, {"kappa", 2}, {"beta", 1.0}, {"grid_points", 11}, {"sites", {0, 1}}, {"trials", 10}},
        [](const json& p, std::uint64_t seed) {
          return local_unitary_suite(detail::chain_basis(p), p.at("beta").get<double>(),
                                     p.at("grid_points").get<int>(), p.at("sites").get<std::vector<int>>(),
                                     p.at("trials").get<int>(), seed);
        }}},
      {"lr-decay",
       {{{"n", 6}, {"sites", {0, 2}}, {"times", {0.5, 1.0, 2.0}}, {"instances", 3}},
        [](const json& p, std::uint64_t seed) {
          std::vector<CheckReport> parts;
          for (int i = 0; i < p.at("instances").get<int>(); ++i)
            for (int site : p.at("sites").get<std::vector<int>>())
              parts.push_back(lr_decay_suite(p.at("n").get<int>(), site,
                                             p.at("times").get<std::vector<double>>(),
                                             derive_seed(seed, static_cast<std::uint64_t>(i))));
          return CheckReport::merge(parts);
        }}},
      {"sum-bounds",
       {{{"tail_tol", 1e-12}},
        [](const json& p, std::uint64_t) {
          return verify_sum_bounds(default_sum_grid(), p.at("tail_tol").get<double>());
        }}},
      {"lower-bound",
       {{{"beta", 1.0}, {"epsilon", 0.1}, {"dense_max", 10}, {"m_max", 12}, {"trials", 100}},
        [](const json& p, std::uint64_t seed) {
          return lower_bound_suite(p.at("beta").get<double>(), p.at("epsilon").get<double>(),
                                   p.at("dense_max").get<int>(), p.at("m_max").get<int>(),
                                   p.at("trials").get<int>(), seed);
        }}},
      {"fourier",
       {{{"betas", {0.5, 1.0, 2.0}}, {"omega_max", 5.0}, {"points", 41}, {"tolerance", 1e-4}},
        [](const json& p, std::uint64_t) {
          return fourier_suite(p.at("betas").get<std::vector<double>>(), p.at("omega_max").get<double>(),
                               p.at("points").get<int>(), p.at("tolerance").get<double>());
        }}},
  };
  return suites;
}

inline std::string lab_suite_names() {
  std::string names;
  for (const auto& [name, suite] : lab_suites()) names += (names.empty() ? "" : ", ") + name;
  return names;
}

/// Config: {suite, seed, params}; params override the suite defaults key by
/// key and must have the same JSON type.
inline json resolve_lab_config(const json& raw, std::optional<std::uint64_t> seed_override) {
  ConfigErrors errs;
  if (!raw.is_object()) throw Error("invalid lab config: config: must be an object");
  detail::reject_unknown(raw, {"suite", "seed", "params"}, "", errs);
  const auto suite = detail::read_string(raw, "suite", "suite", errs);
  if (!suite) {
    if (!raw.contains("suite")) errs.add("suite", "missing");
    errs.raise("lab");
  }
  const auto it = lab_suites().find(*suite);
  if (it == lab_suites().end()) throw Error("unknown suite '" + *suite + "' (available: " + lab_suite_names() + ")");
  json params = it->second.defaults;
  const json given = raw.value("params", json::object());
  if (!given.is_object()) errs.add("params", "must be an object");
  else
    for (const auto& [key, value] : given.items()) {
      if (!params.contains(key)) {
        errs.add("params." + key, "unknown parameter for suite " + *suite);
        continue;
      }
      const json& def = params.at(key);
      const bool same = (def.is_number() && value.is_number()) || (def.is_array() && value.is_array()) ||
                        def.type() == value.type();
      if (!same) errs.add("params." + key, "has the wrong type");
      else params[key] = value;
    }
  const auto seed = seed_override.value_or(detail::read_seed(raw, "seed", "seed", errs).value_or(1));
  errs.raise("lab");
  return {{"suite", *suite}, {"seed", seed}, {"params", params}};
}

inline CommandResult cmd_lab(const json& config, const RunContext& ctx) {
  const std::string suite = config.at("suite").get<std::string>();
  const auto it = lab_suites().find(suite);
  if (it == lab_suites().end()) throw Error("unknown suite '" + suite + "' (available: " + lab_suite_names() + ")");
  const auto seed = config.at("seed").get<std::uint64_t>();
  const CheckReport report = it->second.run(config.at("params"), seed);

  std::ostringstream csv;
  report.write_csv(csv);
  write_file(ctx.out_dir / (suite + ".csv"), csv.str());
  write_file(ctx.out_dir / (suite + ".json"), report.summary().dump(2) + "\n");
  CommandResult r;
  r.seed = seed;
  r.outputs = {suite + ".csv", suite + ".json"};
  r.exit_code = report.pass ? 0 : 1;
  r.summary = report.summary();
  *ctx.log << suite << ": " << (report.pass ? "pass" : "FAIL") << " rows=" << report.rows.size()
           << " min_slack=" << format_double(report.min_slack) << "\n";
  return r;
}

// ---------------------------------------------------------------------------
// hessian, marginals

inline json resolve_model_config(const json& raw, const std::string& command) {
  ConfigErrors errs;
  if (!raw.is_object()) throw Error("invalid " + command + " config: config: must be an object");
  detail::reject_unknown(raw, {"model", "include_matrix"}, "", errs);
  json out;
  if (!raw.contains("model")) {
    errs.add("model", "missing (pass --model FILE)");
  } else if (auto inst = parse_instance(raw.at("model"), "model", errs)) {
    json m = inst->to_json();
    const VectorXd mu = inst->mu.draw(enumerate_basis(inst->lattice, inst->kappa).m());
    m["mu"] = std::vector<double>(mu.begin(), mu.end());
    out["model"] = m;
  }
  if (command == "hessian")
    out["include_matrix"] =
        detail::read_bool(raw, "include_matrix", "include_matrix", errs).value_or(true);
  errs.raise(command);
  return out;
}

inline CommandResult cmd_hessian(const json& config, const RunContext& ctx) {
  const ModelFile file = model_file_from_json(config.at("model"));
  const HessianReport report = hessian_logZ(file.model, file.beta);
  write_file(ctx.out_dir / "hessian.json",
             hessian_to_json(report, config.at("include_matrix").get<bool>()).dump(2) + "\n");
  CommandResult r;
  r.outputs = {"hessian.json"};
  r.summary = {{"min_eig", report.min_eigenvalue}, {"asymmetry", report.asymmetry}};
  *ctx.log << "m=" << file.model.m() << " min_eig=" << format_double(report.min_eigenvalue)
           << " asymmetry=" << format_double(report.asymmetry) << "\n";
  return r;
}

inline CommandResult cmd_marginals(const json& config, const RunContext& ctx) {
  const ModelFile file = model_file_from_json(config.at("model"));
  const VectorXd e = marginals(file.model.basis(), thermal_state(file.model, file.beta));
  std::ostringstream csv;
  csv << "index,value\n";
  for (Eigen::Index l = 0; l < e.size(); ++l) csv << l << ',' << format_double(e(l)) << '\n';
  write_file(ctx.out_dir / "marginals.csv", csv.str());
  CommandResult r;
  r.outputs = {"marginals.csv"};
  *ctx.log << "m=" << e.size() << "\n";
  return r;
}

// ---------------------------------------------------------------------------
// Dispatch and replay

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gen", "learn", "sweep", "lab", "hessian", "marginals"};
  return names;
}

inline json resolve_config(const std::string& command, const json& raw,
                           std::optional<std::uint64_t> seed_override = std::nullopt) {
  if (command == "gen") return resolve_gen_config(raw, seed_override);
  if (command == "learn") return resolve_learn_config(raw, seed_override);
  if (command == "sweep") return resolve_sweep_config(raw, seed_override);
  if (command == "lab") return resolve_lab_config(raw, seed_override);
  if (command == "hessian" || command == "marginals") return resolve_model_config(raw, command);
  throw Error("unknown command '" + command + "'");
}

/// Runs a resolved config and writes manifest.json into the output directory.
inline CommandResult execute(const std::string& command, const json& config, const RunContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  const std::string started = utc_timestamp();
  CommandResult r;
  if (command == "gen") r = cmd_gen(config, ctx);
  else if (command == "learn") r = cmd_learn(config, ctx);
  else if (command == "sweep") r = cmd_sweep(config, ctx);
  else if (command == "lab") r = cmd_lab(config, ctx);
  else if (command == "hessian") r = cmd_hessian(config, ctx);
  else if (command == "marginals") r = cmd_marginals(config, ctx);
  else throw Error("unknown command '" + command + "'");
  write_file(ctx.out_dir / "manifest.json",
             make_manifest(command, config, r, started, utc_timestamp()).dump(2) + "\n");
  return r;
}

struct ReplayReport {
  std::vector<std::string> identical;
  std::vector<std::string> different;
  int exit_code = 0;

  bool ok() const { return different.empty(); }
};

/// Reruns a manifest into `out_dir` and compares every recorded output with
/// the copy next to the manifest.
inline ReplayReport replay(const std::filesystem::path& manifest_path, const RunContext& ctx) {
  const json manifest = read_json_file(manifest_path);
  for (const char* key : {"command", "config", "outputs"})
    if (!manifest.contains(key)) throw Error(std::string("manifest is missing '") + key + "'");
  const auto source = std::filesystem::absolute(manifest_path).parent_path();
  std::filesystem::create_directories(ctx.out_dir);
  if (std::filesystem::equivalent(source, std::filesystem::absolute(ctx.out_dir)))
    throw Error("replay needs an output directory different from the manifest's");

  const std::string command = manifest.at("command").get<std::string>();
  const CommandResult r = execute(command, resolve_config(command, manifest.at("config")), ctx);
  ReplayReport report;
  report.exit_code = r.exit_code;
  for (const auto& name : manifest.at("outputs").get<std::vector<std::string>>()) {
    const bool same = std::filesystem::exists(source / name) && std::filesystem::exists(ctx.out_dir / name) &&
                      read_file(source / name) == read_file(ctx.out_dir / name);
    (same ? report.identical : report.different).push_back(name);
  }
  return report;
}

}  // namespace gibbslearn

#endif  // GIBBSLEARN_EXPERIMENT_HPP
