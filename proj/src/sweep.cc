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

#include "specsim/sweep.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include "specsim/engine.h"
#include "specsim/error.h"

namespace specsim {
namespace {

std::string mode_dir_name(const SpecMode& mode) {
  std::string name = mode.name();
  std::replace(name.begin(), name.end(), '(', '_');
  name.erase(std::remove(name.begin(), name.end(), ')'), name.end());
  return name;
}

}  // namespace

std::vector<SpecMode> default_sweep_modes(int max_len) {
  std::vector<SpecMode> modes{SpecMode::none()};
  for (int k = 1; k <= max_len; ++k) modes.push_back(SpecMode::fixed(k));
  modes.push_back(SpecMode::adaptive());
  return modes;
}

std::vector<SweepCell> run_sweep(const SweepSpec& spec) {
  if (spec.scenarios.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "sweep needs at least one scenario");
  }
  if (spec.modes.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "sweep needs at least one mode");
  }
  const size_t n_modes = spec.modes.size();
  const size_t total = spec.scenarios.size() * n_modes;
  std::vector<SweepCell> cells(total);
  std::vector<std::optional<double>> mean_ms(total);

  std::atomic<size_t> next{0};
  auto worker = [&] {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= total) return;
      const RunConfig& base = spec.scenarios[i / n_modes];
      SweepCell& cell = cells[i];
      cell.scenario = base.scenario.name;
      cell.mode = spec.modes[i % n_modes];
      try {
        EngineConfig engine = base.engine;
        engine.mode = cell.mode;
        MetricsLog log = run_simulation(base.scenario, engine, base.seed);
        cell.summary = summarize(log);
        if (!log.requests.empty()) mean_ms[i] = mean_request_latency_ms(log);
        if (spec.out_dir) {
          export_csv(log, *spec.out_dir / cell.scenario / mode_dir_name(cell.mode));
        }
        if (log.horizon_exceeded) cell.status = "horizon_exceeded";
      } catch (const std::exception& e) {
        cell.status = std::string("error: ") + e.what();
      }
    }
  };
  int jobs = std::max(1, spec.jobs);
  std::vector<std::thread> threads;
  for (int t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  for (size_t s = 0; s < spec.scenarios.size(); ++s) {
    std::optional<double> baseline;
    for (size_t m = 0; m < n_modes; ++m) {
      if (spec.modes[m].kind == SpecMode::Kind::kNone) baseline = mean_ms[s * n_modes + m];
    }
    if (!baseline) continue;
    for (size_t m = 0; m < n_modes; ++m) {
      auto& mine = mean_ms[s * n_modes + m];
      if (mine && *mine > 0) cells[s * n_modes + m].speedup_vs_no_spec = *baseline / *mine;
    }
  }
  return cells;
}

void write_sweep_table(const std::vector<SweepCell>& cells,
                       const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "scenario,mode,status,finished,mean_latency_s,p50_s,p99_s,goodput,"
         "k0_fraction,mean_k,speedup_vs_no_spec\n";
  for (const auto& c : cells) {
    std::string status = c.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << c.scenario << ',' << c.mode.name() << ',' << status << ','
        << c.summary.finished << ',' << format_double(c.summary.mean_latency_s)
        << ',' << format_double(c.summary.p50_s) << ','
        << format_double(c.summary.p99_s) << ','
        << format_double(c.summary.aggregate_goodput) << ','
        << format_double(c.summary.k0_fraction) << ','
        << format_double(c.summary.mean_k) << ','
        << (c.speedup_vs_no_spec ? format_double(*c.speedup_vs_no_spec) : "")
        << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

}  // namespace specsim
