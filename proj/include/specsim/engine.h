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
#include <deque>
#include <string>
#include <vector>

#include "specsim/batch_plan.h"
#include "specsim/controller.h"
#include "specsim/kv_budget.h"
#include "specsim/latency_model.h"
#include "specsim/metrics.h"
#include "specsim/request.h"
#include "specsim/speculation.h"
#include "specsim/workload.h"

namespace specsim {

// How the engine picks proposal lengths.
struct SpecMode {
  enum class Kind { kAdaptive, kFixed, kNone };
  Kind kind = Kind::kAdaptive;
  int k = 0;

  static SpecMode adaptive() { return {Kind::kAdaptive, 0}; }
  // Fixed proposal length. k = 0 behaves exactly like none().
  static SpecMode fixed(int k) { return {Kind::kFixed, k}; }
  static SpecMode none() { return {Kind::kNone, 0}; }

  // "turbospec", "fixed_k(3)" or "no_spec".
  std::string name() const;
  // Accepts the names above plus "fixed:3" and "adaptive".
  static SpecMode parse(const std::string& text);

  bool speculates() const {
    return kind == Kind::kAdaptive || (kind == Kind::kFixed && k > 0);
  }
  bool operator==(const SpecMode&) const = default;
};

struct EngineConfig {
  SpecMode mode = SpecMode::adaptive();
  ControllerConfig controller;
  LatencyProfiles profiles = desk_profiles();
  int max_batch = 128;
  int64_t kv_slots = int64_t{1} << 20;
  // Sigma of a unit-mean lognormal multiplier on step latency; 0 disables.
  double latency_noise_sigma = 0;
  PositionRate position_rate;

  bool uses_draft_model() const {
    return controller.policy == SpecMethod::kDraftModel && mode.speculates();
  }
  void validate() const;
};

struct EngineState {
  // Indexed by request id, sorted by arrival time.
  std::vector<Request> requests;
  size_t next_arrival = 0;
  std::deque<RequestId> queue;
  std::vector<RequestId> active;
  KvBudget kv;
  int64_t reserved_slots = 0;
  double clock_ms = 0;
  int64_t step_index = 0;
  ControllerState controller;
  Rng rng;

  int64_t finished = 0;
  int64_t rejected = 0;
  int64_t draft_prefill_runs = 0;
  int64_t draft_prefill_skips = 0;
  std::vector<RequestRecord> records;

  static EngineState create(const EngineConfig& config,
                            std::vector<Request> requests, uint64_t seed);

  bool done() const {
    return finished + rejected == static_cast<int64_t>(requests.size());
  }
};

// Slots a request holds from admission to completion: its eventual target
// context and, when a draft model is in play, the matching draft context.
int64_t reservation_for(const Request& request, const EngineConfig& config);

// Continuous batching with prefill priority. Moves arrivals up to the clock
// into the queue, admits FCFS while the reservation fits and the batch is
// under max_batch, then returns a prefill plan for newly admitted requests
// or a decode plan over every decoding request. Empty when nothing is
// active.
BatchPlan schedule_batch(EngineState& state, const EngineConfig& config);

StepOutcome run_prefill(EngineState& state, const EngineConfig& config,
                        const BatchPlan& plan);

// One propose -> score -> accept step. chosen_k in the outcome is the
// proposal length for the draft policy and the verification length for
// prompt lookup. Throws Error{kKvOverflow} if accounting breaks the budget.
StepOutcome run_decode_step(EngineState& state, const EngineConfig& config,
                            const BatchPlan& plan);

// Runs until every request finishes or the clock passes the horizon.
MetricsLog run_simulation(const Scenario& scenario, const EngineConfig& config,
                          uint64_t seed);
MetricsLog run_requests(std::vector<Request> requests,
                        const EngineConfig& config, uint64_t seed,
                        double horizon_s = 0);

}  // namespace specsim
