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

#include "specsim/controller.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "specsim/error.h"

namespace specsim {

void ControllerConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidConfig, msg);
  };
  if (max_len < 1) fail("max_len must be >= 1");
  if (policy == SpecMethod::kPromptLookup && fixed_pld_len < 1) {
    fail("fixed_pld_len must be >= 1 for the pld policy");
  }
  if (reset_period < 1) fail("reset_period must be >= 1");
  if (!(ewma_decay > 0 && ewma_decay < 1)) fail("ewma_decay must be in (0,1)");
  if (!(prior_rate >= 0 && prior_rate <= 1)) fail("prior_rate must be in [0,1]");
  if (!(pld_match_prob >= 0 && pld_match_prob <= 1)) {
    fail("pld_match_prob must be in [0,1]");
  }
}

GoodputEstimate estimate_goodput(const ControllerState& state,
                                 const ControllerConfig& config,
                                 const LatencyModel& target,
                                 const Proposer& proposer,
                                 const BatchPlan& plan, int k) {
  const double rate = state.acceptance.rate;
  GoodputEstimate est;
  if (proposer.method == SpecMethod::kPromptLookup && k > 0) {
    const double p = config.pld_match_prob;
    const double per_match = expected_generated_length(rate, k);
    double batched = 0;
    for (const auto& e : plan.entries) {
      if (e.spec_eligible) {
        est.accept_len += p * per_match + (1.0 - p);
        batched += p * k + 1.0;
      } else {
        est.accept_len += 1.0;
        batched += 1.0;
      }
    }
    est.latency_ms =
        proposer.lookup_ms +
        predict_forward_time(target, static_cast<double>(plan.context_total()),
                             batched);
  } else {
    BatchPlan candidate = with_uniform_proposal(plan, k);
    for (const auto& e : candidate.entries) {
      est.accept_len += expected_generated_length(rate, e.proposed);
    }
    est.latency_ms = predict_batch_latency(target, proposer, candidate, k);
  }
  est.goodput = est.latency_ms > 0 ? 1000.0 * est.accept_len / est.latency_ms
                                   : 0.0;
  return est;
}

int64_t kv_tokens_needed(const BatchPlan& plan, SpecMethod method, int k) {
  int64_t needed = 0;
  for (const auto& e : plan.entries) {
    if (k > 0 && e.spec_eligible) {
      needed += k + 1;
      if (method == SpecMethod::kDraftModel) {
        needed += std::max<int64_t>(1, e.draft_lag) + k - 1;
      }
    } else {
      needed += 1;
    }
  }
  return needed;
}

SpecDecision argmax_goodput(const ControllerState& state,
                            const ControllerConfig& config,
                            const LatencyModel& target,
                            const Proposer& proposer, const BatchPlan& plan,
                            const KvBudget& kv) {
  SpecDecision best;
  double best_goodput = -1;
  const int64_t free_slots = kv.free_slots();
  for (int k = 0; k <= config.max_len; ++k) {
    if (k > 0 && kv_tokens_needed(plan, proposer.method, k) > free_slots) {
      continue;
    }
    GoodputEstimate est =
        estimate_goodput(state, config, target, proposer, plan, k);
    if (est.goodput > best_goodput) {
      best_goodput = est.goodput;
      best.proposed_len = k;
      best.verification_len = k;
      best.predicted_goodput = est.goodput;
      best.predicted_latency = est.latency_ms;
    }
  }
  return best;
}

int get_proposed_len(const ControllerState& state,
                     const ControllerConfig& config,
                     const LatencyModel& target, const Proposer& proposer,
                     const BatchPlan& plan, const KvBudget& kv) {
  if (config.policy == SpecMethod::kPromptLookup) return config.fixed_pld_len;
  return argmax_goodput(state, config, target, proposer, plan, kv).proposed_len;
}

int get_verification_len(const ControllerState& state,
                         const ControllerConfig& config,
                         const LatencyModel& target, const Proposer& proposer,
                         const BatchPlan& plan, int proposed_len,
                         const KvBudget& kv) {
  if (config.policy == SpecMethod::kDraftModel) {
    if (config.pruner) {
      return std::clamp(config.pruner(plan, proposed_len), 0, proposed_len);
    }
    return proposed_len;
  }
  const double rate = state.acceptance.rate;
  const int64_t free_slots = kv.free_slots();
  int best_v = 0;
  double best_goodput = -1;
  for (int v = 0; v <= config.fixed_pld_len; ++v) {
    BatchPlan candidate = plan;
    double accept_len = 0;
    int64_t needed = 0;
    for (auto& e : candidate.entries) {
      e.verified = std::min(v, e.proposed);
      accept_len += expected_generated_length(rate, e.verified);
      needed += e.verified + 1;
    }
    if (v > 0 && needed > free_slots) continue;
    double latency =
        predict_batch_latency(target, proposer, candidate, proposed_len);
    double goodput = latency > 0 ? 1000.0 * accept_len / latency : 0.0;
    if (goodput > best_goodput) {
      best_goodput = goodput;
      best_v = v;
    }
  }
  return best_v;
}

PrefillDecision on_prefill(ControllerState& state,
                           const ControllerConfig& config,
                           int64_t batch_size) {
  if (config.policy == SpecMethod::kPromptLookup || !config.prefill_disabling) {
    return PrefillDecision::kRunDraftPrefill;
  }
  if (state.disable_batch_size && batch_size > *state.disable_batch_size) {
    ++state.skip_count;
    // Probe with a real draft prefill once every reset_period skips.
    if (state.skip_count % config.reset_period == 0) {
      return PrefillDecision::kRunDraftPrefill;
    }
    return PrefillDecision::kSkipDraftPrefill;
  }
  return PrefillDecision::kRunDraftPrefill;
}

void on_decision(ControllerState& state, const ControllerConfig& config,
                 const SpecDecision& decision, int64_t batch_size,
                 bool speculation_possible) {
  if (decision.proposed_len == 0 && speculation_possible && batch_size > 0) {
    state.disable_batch_size = batch_size;
  }
  ++state.steps_since_reset;
  if (state.steps_since_reset >= config.reset_period) {
    state.disable_batch_size.reset();
    state.skip_count = 0;
    state.steps_since_reset = 0;
  }
}

double expected_per_token_latency(std::span<const double> outcome_latencies,
                                  double rate, int k) {
  if (static_cast<int>(outcome_latencies.size()) != k + 1) {
    throw Error(ErrorCode::kLengthMismatch,
                "need k + 1 = " + std::to_string(k + 1) +
                    " outcome latencies, got " +
                    std::to_string(outcome_latencies.size()));
  }
  // P(j + 1 tokens) = rate^j (1 - rate) for j < k, rate^k for j = k.
  double expected = 0;
  double prefix = 1.0;
  for (int j = 0; j <= k; ++j) {
    double p = j < k ? prefix * (1.0 - rate) : prefix;
    expected += p * outcome_latencies[static_cast<size_t>(j)];
    prefix *= rate;
  }
  return expected;
}

}  // namespace specsim
