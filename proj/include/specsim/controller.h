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
#include <functional>
#include <optional>
#include <span>

#include "specsim/batch_plan.h"
#include "specsim/kv_budget.h"
#include "specsim/latency_model.h"
#include "specsim/speculation.h"

namespace specsim {

// Hook for pruning the verification length of draft-model proposals.
// Receives the post-proposal plan and the proposed length.
using VerificationPruner =
    std::function<int(const BatchPlan& plan, int proposed_len)>;

struct ControllerConfig {
  int max_len = 8;
  int fixed_pld_len = 5;
  SpecMethod policy = SpecMethod::kDraftModel;
  int64_t reset_period = 500;
  double ewma_decay = 0.9;
  double prior_rate = 0.7;
  // Match probability the offline prompt-lookup estimator assumes.
  double pld_match_prob = 0.5;
  bool prefill_disabling = true;
  VerificationPruner pruner;

  // Throws Error{kInvalidConfig}.
  void validate() const;
};

struct ControllerState {
  AcceptanceEstimate acceptance;
  std::optional<int64_t> disable_batch_size;
  int64_t skip_count = 0;
  int64_t steps_since_reset = 0;

  static ControllerState initial(const ControllerConfig& config) {
    ControllerState s;
    s.acceptance =
        AcceptanceEstimate::with_prior(config.prior_rate, config.ewma_decay);
    return s;
  }
};

struct SpecDecision {
  int proposed_len = 0;
  int verification_len = 0;
  double predicted_goodput = 0;  // tokens per second
  double predicted_latency = 0;  // milliseconds
};

struct GoodputEstimate {
  double goodput = 0;     // tokens per second
  double latency_ms = 0;
  double accept_len = 0;  // expected generated tokens for the whole batch
};

// Goodput of running `plan` with proposal length k under the current
// acceptance estimate. For prompt lookup the match outcome is not known yet,
// so each eligible member is weighted by config.pld_match_prob.
GoodputEstimate estimate_goodput(const ControllerState& state,
                                 const ControllerConfig& config,
                                 const LatencyModel& target,
                                 const Proposer& proposer,
                                 const BatchPlan& plan, int k);

// KV slots a decode step needs beyond what is already stored: verification
// tokens for every member plus draft tokens written while proposing.
int64_t kv_tokens_needed(const BatchPlan& plan, SpecMethod method, int k);

// Exhaustive search over k = 0..max_len. Candidates that do not fit in the
// free KV slots are skipped; ties go to the smaller k.
SpecDecision argmax_goodput(const ControllerState& state,
                            const ControllerConfig& config,
                            const LatencyModel& target,
                            const Proposer& proposer, const BatchPlan& plan,
                            const KvBudget& kv);

int get_proposed_len(const ControllerState& state,
                     const ControllerConfig& config,
                     const LatencyModel& target, const Proposer& proposer,
                     const BatchPlan& plan, const KvBudget& kv);

// `plan` carries the realized per-member proposals. Draft policy returns
// proposed_len (or the pruner's choice); prompt lookup searches
// v = 0..fixed_pld_len where each member verifies min(v, its proposal).
int get_verification_len(const ControllerState& state,
                         const ControllerConfig& config,
                         const LatencyModel& target, const Proposer& proposer,
                         const BatchPlan& plan, int proposed_len,
                         const KvBudget& kv);

enum class PrefillDecision { kRunDraftPrefill, kSkipDraftPrefill };

PrefillDecision on_prefill(ControllerState& state,
                           const ControllerConfig& config, int64_t batch_size);

// Records the disable threshold when speculation was turned off for a batch
// that could have speculated, and handles the periodic reset.
void on_decision(ControllerState& state, const ControllerConfig& config,
                 const SpecDecision& decision, int64_t batch_size,
                 bool speculation_possible = true);

// Expected per-token latency of one step. outcome_latencies[j] is the
// per-token latency when j + 1 tokens are emitted (size k + 1).
double expected_per_token_latency(std::span<const double> outcome_latencies,
                                  double rate, int k);

}  // namespace specsim
