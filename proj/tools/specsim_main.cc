/* Copyright 2026 The specsim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// specsim: command-line front end for the serving simulator.
//
//   specsim fit PROFILE.csv -o model.json
//   specsim run --scenario scenarios/qps_ramp.json --mode turbospec --out out/
//   specsim sweep --scenario a.json --scenario b.json --out sweep/

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "specsim/config.h"
#include "specsim/engine.h"
#include "specsim/error.h"
#include "specsim/latency_model.h"
#include "specsim/metrics.h"
#include "specsim/sweep.h"

namespace {

using namespace specsim;

std::filesystem::path default_out_root() {
  if (const char* env = std::getenv("SPECSIM_OUT_ROOT"); env && *env) {
    return env;
  }
  return "specsim_out";
}

struct RunFlags {
  std::string scenario;
  std::string config;
  std::string mode;
  std::optional<uint64_t> seed;
  std::string out;
  std::string target_profile;
  std::string target_prefill_profile;
  std::string draft_profile;
  std::string draft_prefill_profile;
  std::optional<int> max_len;
  std::string policy;
  std::string dump_config;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool multi_scenario) {
  if (!multi_scenario) {
    cmd->add_option("--scenario", f.scenario, "Scenario file (JSON)");
    cmd->add_option("--config", f.config,
                    "Run config written by --dump-config");
    cmd->add_option("--mode", f.mode, "turbospec | no_spec | fixed_k(K)");
    cmd->add_option("--dump-config", f.dump_config,
                    "Write the resolved run config here ('-' for stdout)");
  }
  cmd->add_option("--seed", f.seed, "Override the scenario seed");
  cmd->add_option("--out", f.out,
                  "Output directory (default $SPECSIM_OUT_ROOT or specsim_out)");
  cmd->add_option("--target-profile", f.target_profile,
                  "Target decode latency model (JSON from `fit`)");
  cmd->add_option("--target-prefill-profile", f.target_prefill_profile,
                  "Target prefill latency model");
  cmd->add_option("--draft-profile", f.draft_profile,
                  "Draft decode latency model");
  cmd->add_option("--draft-prefill-profile", f.draft_prefill_profile,
                  "Draft prefill latency model");
  cmd->add_option("--max-len", f.max_len, "Largest proposal length searched");
  cmd->add_option("--policy", f.policy, "draft | pld");
}

void apply_overrides(RunConfig& rc, const RunFlags& f) {
  auto& prof = rc.engine.profiles;
  if (!f.target_profile.empty()) {
    prof.target_decode = load_latency_model(f.target_profile).model;
    if (f.target_prefill_profile.empty()) prof.target_prefill = prof.target_decode;
  }
  if (!f.target_prefill_profile.empty()) {
    prof.target_prefill = load_latency_model(f.target_prefill_profile).model;
  }
  if (!f.draft_profile.empty()) {
    prof.draft_decode = load_latency_model(f.draft_profile).model;
    if (f.draft_prefill_profile.empty()) prof.draft_prefill = prof.draft_decode;
  }
  if (!f.draft_prefill_profile.empty()) {
    prof.draft_prefill = load_latency_model(f.draft_prefill_profile).model;
  }
  if (f.seed) rc.seed = *f.seed;
  if (f.max_len) rc.engine.controller.max_len = *f.max_len;
  if (!f.policy.empty()) rc.engine.controller.policy = spec_method_from_string(f.policy);
  if (!f.mode.empty()) rc.engine.mode = SpecMode::parse(f.mode);
  rc.engine.validate();
}

void print_summary(std::ostream& os, const MetricsLog& log) {
  RunSummary s = summarize(log);
  char line[256];
  std::snprintf(line, sizeof line,
                "finished %lld  unfinished %lld  rejected %lld\n",
                static_cast<long long>(s.finished),
                static_cast<long long>(log.unfinished_requests),
                static_cast<long long>(log.rejected_requests));
  os << line;
  std::snprintf(line, sizeof line,
                "latency mean %.4f s  p50 %.4f s  p90 %.4f s  p99 %.4f s\n",
                s.mean_latency_s, s.p50_s, s.p90_s, s.p99_s);
  os << line;
  std::snprintf(line, sizeof line,
                "goodput %.2f tok/s  decode steps %lld  k=0 steps %.1f%%  "
                "mean k %.3f\n",
                s.aggregate_goodput, static_cast<long long>(s.decode_steps),
                100.0 * s.k0_fraction, s.mean_k);
  os << line;
  if (log.draft_prefill_runs + log.draft_prefill_skips > 0) {
    os << "draft prefills run " << log.draft_prefill_runs << "  skipped "
       << log.draft_prefill_skips << "\n";
  }
  if (log.horizon_exceeded) os << "warning: horizon reached before all requests finished\n";
}

int cmd_fit(const std::string& csv_path, const std::string& out_path,
            std::string profile_id) {
  auto samples = load_profile_csv(csv_path);
  if (profile_id.empty()) profile_id = std::filesystem::path(csv_path).stem().string();
  FitResult fit = fit_latency_model(samples, profile_id);
  std::printf("profile_id %s\n", fit.model.profile_id.c_str());
  std::printf("ctx_coeff  %.9g ms/token\n", fit.model.ctx_coeff);
  std::printf("tok_coeff  %.9g ms/token\n", fit.model.tok_coeff);
  std::printf("fixed_cost %.9g ms\n", fit.model.fixed_cost);
  std::printf("r_squared  %.9f\n", fit.r_squared);
  if (!out_path.empty()) save_latency_model(fit, out_path);
  return 0;
}

int cmd_run(const RunFlags& f) {
  if (f.scenario.empty() == f.config.empty()) {
    throw Error(ErrorCode::kInvalidConfig,
                "run needs exactly one of --scenario or --config");
  }
  RunConfig rc = load_run_config(f.config.empty() ? f.scenario : f.config);
  apply_overrides(rc, f);

  if (!f.dump_config.empty()) {
    std::string text = dump_run_config(rc);
    if (f.dump_config == "-") {
      std::cout << text;
    } else {
      std::ofstream out(f.dump_config);
      if (!out) throw Error(ErrorCode::kIoError, "cannot write " + f.dump_config);
      out << text;
    }
  }

  std::filesystem::path out_dir =
      f.out.empty() ? default_out_root() / rc.scenario.name : std::filesystem::path(f.out);
  MetricsLog log = run_simulation(rc.scenario, rc.engine, rc.seed);
  export_csv(log, out_dir);
  std::ostream& os = f.dump_config == "-" ? std::cerr : std::cout;
  os << "scenario " << rc.scenario.name << "  mode " << rc.engine.mode.name()
     << "  seed " << rc.seed << "\n";
  print_summary(os, log);
  os << "wrote " << out_dir.string() << "\n";
  return 0;
}

int cmd_sweep(const std::vector<std::string>& scenarios, const RunFlags& f,
              const std::string& modes_text, int jobs) {
  if (scenarios.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "sweep needs at least one --scenario");
  }
  SweepSpec spec;
  spec.jobs = jobs;
  int max_len = 8;
  for (const auto& path : scenarios) {
    RunConfig rc = load_run_config(path);
    apply_overrides(rc, f);
    max_len = rc.engine.controller.max_len;
    spec.scenarios.push_back(std::move(rc));
  }
  if (modes_text.empty()) {
    spec.modes = default_sweep_modes(max_len);
  } else {
    std::stringstream ss(modes_text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) spec.modes.push_back(SpecMode::parse(item));
    }
  }
  std::filesystem::path out_dir = f.out.empty() ? default_out_root() / "sweep"
                                                : std::filesystem::path(f.out);
  spec.out_dir = out_dir;
  auto cells = run_sweep(spec);
  write_sweep_table(cells, out_dir / "comparison.csv");

  int failures = 0;
  for (const auto& c : cells) {
    std::printf("%-20s %-14s %-10s mean %.4f s  speedup %s\n", c.scenario.c_str(),
                c.mode.name().c_str(), c.status.substr(0, 10).c_str(),
                c.summary.mean_latency_s,
                c.speedup_vs_no_spec ? format_double(*c.speedup_vs_no_spec).c_str()
                                     : "-");
    if (c.status != "ok") {
      ++failures;
      std::fprintf(stderr, "cell %s/%s failed: %s\n", c.scenario.c_str(),
                   c.mode.name().c_str(), c.status.c_str());
    }
  }
  std::printf("wrote %s\n", (out_dir / "comparison.csv").string().c_str());
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speculative-decoding serving simulator"};
  app.require_subcommand(1);

  std::string fit_csv;
  std::string fit_out;
  std::string fit_id;
  auto* fit = app.add_subcommand("fit", "Fit a latency model to profiling samples");
  fit->add_option("profile_csv", fit_csv, "CSV: context_tokens,batched_tokens,latency_ms")
      ->required();
  fit->add_option("-o,--out", fit_out, "Write the fitted model (JSON) here");
  fit->add_option("--profile-id", fit_id, "Identifier stored with the model");

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run one scenario");
  add_run_flags(run, run_flags, false);

  RunFlags sweep_flags;
  std::vector<std::string> sweep_scenarios;
  std::string sweep_modes;
  int sweep_jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* sweep = app.add_subcommand("sweep", "Compare modes across scenarios");
  sweep->add_option("--scenario", sweep_scenarios, "Scenario file (repeatable)");
  sweep->add_option("--modes", sweep_modes,
                    "Comma-separated modes (default: no_spec, fixed_k(1..max_len), "
                    "turbospec)");
  sweep->add_option("--jobs", sweep_jobs, "Cells to run concurrently");
  add_run_flags(sweep, sweep_flags, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit(fit_csv, fit_out, fit_id);
    if (run->parsed()) return cmd_run(run_flags);
    if (sweep->parsed()) return cmd_sweep(sweep_scenarios, sweep_flags, sweep_modes, sweep_jobs);
  } catch (const specsim::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
