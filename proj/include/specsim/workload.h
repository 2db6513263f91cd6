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
#include <string_view>
#include <vector>

#include "specsim/request.h"
#include "specsim/speculation.h"

namespace specsim {

enum class LengthKind { kFixed, kTruncatedNormal, kLogNormal };

std::string_view to_string(LengthKind kind);
LengthKind length_kind_from_string(std::string_view name);

// Integer length distribution. Truncated normals are bounded to
// [max(1, min), max] where max defaults to mean + 4 * stddev; the underlying
// normal is shifted and widened so the truncated samples keep the stated
// mean and stddev whenever that is attainable.
struct LengthDist {
  LengthKind kind = LengthKind::kFixed;
  double mean = 1;
  double stddev = 0;
  int64_t min = 1;
  int64_t max = 0;  // 0 means default

  static LengthDist fixed(int64_t n) {
    return {LengthKind::kFixed, static_cast<double>(n), 0, 1, 0};
  }
  static LengthDist truncated_normal(double mean, double stddev) {
    return {LengthKind::kTruncatedNormal, mean, stddev, 1, 0};
  }
  static LengthDist lognormal(double mean, double stddev) {
    return {LengthKind::kLogNormal, mean, stddev, 1, 0};
  }

  void validate(const std::string& what) const;
};

// Draws from a LengthDist. Holds the moment-matched parameters.
class LengthSampler {
 public:
  explicit LengthSampler(const LengthDist& dist);
  int64_t operator()(Rng& rng) const;

  double lower() const { return lo_; }
  double upper() const { return hi_; }

 private:
  LengthDist dist_;
  double lo_ = 1;
  double hi_ = 0;
  double mu_ = 0;
  double sigma_ = 0;
};

struct DatasetProfile {
  std::string name;
  LengthDist prompt_len;
  LengthDist output_len;
  double true_acceptance = 0.7;
  std::optional<double> pld_match_prob;

  void validate() const;
};

// Distributional stand-ins named after common benchmark datasets: input and
// output length moments and draft acceptance rates for a 160M draft with a
// 7B target. Match probabilities for prompt lookup are assumptions.
std::vector<DatasetProfile> builtin_datasets();
// Throws Error{kInvalidConfig} for unknown names.
DatasetProfile builtin_dataset(std::string_view name);

struct ScenarioPhase {
  double duration_s = 1;
  double qps = 0;
  DatasetProfile dataset;
};

struct Scenario {
  std::string name = "scenario";
  std::vector<ScenarioPhase> phases;
  uint64_t seed = 0;
  double horizon_s = 0;  // 0 means unbounded
  // Replay this trace instead of generating arrivals from `phases`.
  std::optional<std::filesystem::path> trace;

  double total_duration_s() const;
  void validate() const;
};

// Poisson arrivals per phase; lengths and hidden acceptance come from the
// phase's dataset profile.
std::vector<Request> generate_arrivals(const Scenario& scenario, Rng& rng);

// CSV `arrival_ms,prompt_len,output_len,acceptance`. Rows are returned in
// arrival order. Errors carry the offending line number.
std::vector<Request> load_trace(const std::filesystem::path& path,
                                double match_prob = 0.5);

}  // namespace specsim
