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

// gibbslearn: generate instances, learn Hamiltonians from simulated
// measurements, run sweeps and lab suites, replay manifests.

#include "gibbslearn/experiment.hpp"

#include <CLI11/CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

using gibbslearn::json;

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c, bool with_jobs) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
  if (with_jobs) cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

json load_config(const std::string& path) {
  return path.empty() ? json::object() : gibbslearn::read_json_file(path);
}

int run(const std::string& command, const json& raw, const Common& c) {
  const json config = gibbslearn::resolve_config(command, raw, c.seed);
  gibbslearn::RunContext ctx;
  ctx.out_dir = c.out;
  ctx.jobs = c.jobs;
  return gibbslearn::execute(command, config, ctx).exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hamiltonian learning from simulated Gibbs-state measurements"};
  app.set_version_flag("--version", std::string(gibbslearn::kToolVersion));
  app.require_subcommand(1);

  Common gen_opts;
  auto* gen = app.add_subcommand("gen", "Generate a model file from an instance config");
  add_common(gen, gen_opts, false);
  gen->get_option("--config")->required();

  Common learn_opts;
  std::string learn_model;
  std::optional<long> learn_copies;
  std::string learn_scheme;
  auto* learn = app.add_subcommand("learn", "Estimate marginals and solve for the coefficients");
  add_common(learn, learn_opts, false);
  learn->add_option("--model", learn_model, "Model file written by gen")->check(CLI::ExistingFile);
  learn->add_option("--copies,-N", learn_copies, "Number of state copies");
  learn->add_option("--scheme", learn_scheme, "direct, grouped or exact")
      ->check(CLI::IsMember({"direct", "grouped", "exact"}));

  Common sweep_opts;
  std::string sweep_scheme;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of learning trials");
  add_common(sweep, sweep_opts, true);
  sweep->get_option("--config")->required();
  sweep->add_option("--scheme", sweep_scheme, "direct, grouped or exact")
      ->check(CLI::IsMember({"direct", "grouped", "exact"}));

  Common lab_opts;
  std::string suite;
  auto* lab = app.add_subcommand("lab", "Run a numerical check suite");
  add_common(lab, lab_opts, false);
  lab->add_option("suite", suite, "Suite name (" + gibbslearn::lab_suite_names() + ")");

  Common hess_opts;
  std::string hess_model;
  auto* hessian = app.add_subcommand("hessian", "Dump the Hessian of log Z at the model's coefficients");
  add_common(hessian, hess_opts, false);
  hessian->add_option("--model", hess_model, "Model file")->check(CLI::ExistingFile);

  Common marg_opts;
  std::string marg_model;
  auto* marg = app.add_subcommand("marginals", "Dump the exact marginals of a model");
  add_common(marg, marg_opts, false);
  marg->add_option("--model", marg_model, "Model file")->check(CLI::ExistingFile);

  std::string manifest;
  std::string replay_out;
  auto* replay = app.add_subcommand("replay", "Rerun a manifest and compare its outputs byte for byte");
  replay->add_option("manifest", manifest, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", replay_out, "Output directory for the rerun")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return run("gen", load_config(gen_opts.config), gen_opts);

    if (*learn) {
      json raw = load_config(learn_opts.config);
      if (!learn_model.empty()) raw["model"] = gibbslearn::read_json_file(learn_model);
      if (learn_copies) raw["copies"] = *learn_copies;
      if (!learn_scheme.empty()) raw["scheme"] = learn_scheme;
      return run("learn", raw, learn_opts);
    }

    if (*sweep) {
      json raw = load_config(sweep_opts.config);
      if (!sweep_scheme.empty()) raw["scheme"] = sweep_scheme;
      return run("sweep", raw, sweep_opts);
    }

    if (*lab) {
      json raw = load_config(lab_opts.config);
      if (!suite.empty()) raw["suite"] = suite;
      return run("lab", raw, lab_opts);
    }

    if (*hessian || *marg) {
      const bool is_hessian = hessian->parsed();
      const Common& opts = is_hessian ? hess_opts : marg_opts;
      json raw = load_config(opts.config);
      const std::string& model = is_hessian ? hess_model : marg_model;
      if (!model.empty()) raw["model"] = gibbslearn::read_json_file(model);
      return run(is_hessian ? "hessian" : "marginals", raw, opts);
    }

    if (*replay) {
      gibbslearn::RunContext ctx;
      ctx.out_dir = replay_out;
      const auto report = gibbslearn::replay(manifest, ctx);
      for (const auto& name : report.identical) std::cout << "identical " << name << "\n";
      for (const auto& name : report.different) std::cout << "DIFFERENT " << name << "\n";
      return report.ok() ? report.exit_code : 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
