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
#include <string>
#include <utility>
#include <vector>

#include "specsim/batch_plan.h"

namespace specsim {

// Realized result of one engine step.
struct StepOutcome {
  int64_t step_index = 0;
  Phase phase = Phase::kDecode;
  double clock_ms = 0;  // clock after the step
  int64_t batch_size = 0;
  double latency_ms = 0;
  std::vector<int> accepted_per_request;
  std::vector<int> generated_per_request;
  int64_t generated_tokens = 0;
  int64_t proposed_tokens = 0;
  int64_t verified_tokens = 0;
  int64_t accepted_tokens = 0;
  double realized_goodput = 0;  // tokens per second
  int chosen_k = 0;
  int verification_len = 0;
  // Matched / verified proposal positions this step; -1 when nothing was
  // verified.
  double acceptance_fraction = -1;
  double acceptance_estimate = 0;  // estimate after the step
  double predicted_goodput = 0;
  int eligible_count = 0;
  bool draft_prefill_ran = false;
};

struct RequestRecord {
  int64_t id = 0;
  double arrival_ms = 0;
  double finish_ms = 0;
  double latency_ms = 0;
  int64_t prompt_len = 0;
  int64_t output_len = 0;
  int phase_index = -1;
};

struct MetricsLog {
  std::vector<StepOutcome> steps;
  std::vector<RequestRecord> requests;
  std::vector<std::pair<std::string, std::string>> meta;
  bool horizon_exceeded = false;
  int64_t draft_prefill_runs = 0;
  int64_t draft_prefill_skips = 0;
  int64_t unfinished_requests = 0;
  int64_t rejected_requests = 0;

  void add_meta(std::string key, std::string value) {
    meta.emplace_back(std::move(key), std::move(value));
  }
};

// Type-7 (linear interpolation) quantiles of request latency, in seconds.
// Throws Error{kNoFinishedRequests}.
std::vector<std::pair<double, double>> latency_cdf(
    const MetricsLog& log, const std::vector<double>& quantiles);

// Sliding-window goodput: point i covers steps [i - window + 1, i]. A
// window at least as long as the run yields a single aggregate point.
std::vector<std::pair<int64_t, double>> goodput_timeline(const MetricsLog& log,
                                                         int64_t window);

double mean_request_latency_ms(const MetricsLog& log);

// Mean baseline request latency over mean speculative request latency.
double compute_speedup(const MetricsLog& baseline, const MetricsLog& spec);

struct RunSummary {
  int64_t finished = 0;
  double mean_latency_s = 0;
  double p50_s = 0;
  double p90_s = 0;
  double p99_s = 0;
  double aggregate_goodput = 0;  // generated tokens per busy second
  double k0_fraction = 0;        // share of decode steps with k = 0
  double mean_k = 0;
  int64_t decode_steps = 0;
  int64_t generated_tokens = 0;
};

RunSummary summarize(const MetricsLog& log);

// Writes steps.csv, requests.csv and meta.csv into `out_dir` (created if
// missing). Throws Error{kIoError}.
void export_csv(const MetricsLog& log, const std::filesystem::path& out_dir);

// Shortest round-trip decimal form; used for every float in CSV output.
std::string format_double(double value);

}  // namespace specsim
