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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "specsim/engine.h"
#include "specsim/workload.h"

namespace specsim {

// Everything needed to reproduce one simulation run.
struct RunConfig {
  Scenario scenario;
  EngineConfig engine;
  uint64_t seed = 0;
};

// Parses either a scenario file or a dumped run config (one that has a
// top-level "scenario" object). Relative trace paths resolve against
// `base_dir`. Unknown keys are rejected so typos do not pass silently.
RunConfig run_config_from_json(const std::string& text,
                               const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Fully resolved config; feeding it back through run_config_from_json
// reproduces the same run.
std::string dump_run_config(const RunConfig& config);

}  // namespace specsim
