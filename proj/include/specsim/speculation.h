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
#include <random>
#include <span>
#include <vector>

#include "specsim/batch_plan.h"

namespace specsim {

using Rng = std::mt19937_64;

// Running token-acceptance estimate (EWMA over per-step acceptance).
struct AcceptanceEstimate {
  double rate = 0.7;
  double decay = 0.9;
  int64_t observations = 0;

  static AcceptanceEstimate with_prior(double prior, double decay) {
    return {prior, decay, 0};
  }
};

// Ground truth for the simulated proposer. `true_rate` is hidden from the
// controller.
struct SpecProfile {
  SpecMethod kind = SpecMethod::kDraftModel;
  double true_rate = 0.7;
  std::optional<double> match_prob;  // prompt lookup only
  int fixed_pld_len = 5;
};

// Sum_{j=0..k} rate^j: tokens emitted per request for k proposals,
// counting the bonus token.
double expected_generated_length(double rate, int k);

// Throws Error{kLengthMismatch} if the spans differ in length.
double expected_batch_tokens(std::span<const double> rates,
                             std::span<const int> ks);

// Optional per-position override of the acceptance probability
// (position is 0-based within the proposal).
using PositionRate = std::function<double(int position, double base_rate)>;

struct AcceptanceDraw {
  // Length of the leading run of accepted proposals, 0..k.
  int accepted = 0;
  // Positions (out of k) where the proposal agreed with the target. Every
  // position is scored in the verification pass, so this is observable even
  // past the first rejection.
  int matched = 0;
};

AcceptanceDraw sample_acceptance(Rng& rng, double true_rate, int k,
                                 const PositionRate& position_rate = {});

int sample_accepted_count(Rng& rng, double true_rate, int k);

// rate' = decay * rate + (1 - decay) * step_rate, clamped to [0, 1].
AcceptanceEstimate update_acceptance(const AcceptanceEstimate& est,
                                     double step_rate);

// Each eligible member independently finds a match with profile.match_prob
// and then proposes profile.fixed_pld_len tokens; otherwise 0.
std::vector<int> propose_pld(Rng& rng, const SpecProfile& profile,
                             const BatchPlan& batch);

// Same with per-member match probabilities.
std::vector<int> propose_pld(Rng& rng, int fixed_pld_len,
                             std::span<const double> match_probs);

}  // namespace specsim
