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

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "specsim/config.h"
#include "specsim/metrics.h"

namespace specsim {

struct SweepCell {
  std::string scenario;
  SpecMode mode;
  RunSummary summary;
  std::optional<double> speedup_vs_no_spec;
  std::string status = "ok";  // or the error message
};

struct SweepSpec {
  std::vector<RunConfig> scenarios;
  std::vector<SpecMode> modes;
  int jobs = 1;
  // When set, each cell exports its CSVs to out_dir/<scenario>/<mode>/.
  std::optional<std::filesystem::path> out_dir;
};

// no_spec, fixed_k(1..max_len), turbospec.
std::vector<SpecMode> default_sweep_modes(int max_len);

// Runs the scenario x mode product, `jobs` cells at a time. Cell failures
// are reported in SweepCell::status rather than thrown. Result order is
// scenario-major, mode-minor regardless of completion order.
std::vector<SweepCell> run_sweep(const SweepSpec& spec);

// scenario,mode,status,finished,mean_latency_s,p50_s,p99_s,goodput,
// k0_fraction,mean_k,speedup_vs_no_spec
void write_sweep_table(const std::vector<SweepCell>& cells,
                       const std::filesystem::path& path);

}  // namespace specsim
