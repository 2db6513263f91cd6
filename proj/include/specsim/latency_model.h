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
#include <span>
#include <string>
#include <vector>

#include "specsim/batch_plan.h"

namespace specsim {

// One offline profiling measurement of a single forward pass.
struct ProfileSample {
  double context_tokens = 0;
  double batched_tokens = 1;
  double latency_ms = 0;
};

// Forward-pass latency law
//   T_fwd = ctx_coeff * N_context + tok_coeff * N_batched + fixed_cost
// for one model/hardware configuration, in milliseconds.
struct LatencyModel {
  double ctx_coeff = 0;
  double tok_coeff = 0;
  double fixed_cost = 0;
  std::string profile_id;

  LatencyModel scaled(double factor) const {
    return {ctx_coeff * factor, tok_coeff * factor, fixed_cost * factor,
            profile_id};
  }
};

struct FitResult {
  LatencyModel model;
  double r_squared = 0;
};

// Ordinary least squares over (context, batched, 1). Any coefficient that
// comes out negative is pinned to zero and the rest are refit, until all
// free coefficients are non-negative.
//
// Throws Error{kTooFewSamples} below three samples and
// Error{kDegenerateDesign} when the design matrix is rank deficient.
FitResult fit_latency_model(std::span<const ProfileSample> samples,
                            std::string profile_id);

double predict_forward_time(const LatencyModel& model, double context_tokens,
                            double batched_tokens);

// How candidate tokens are produced and what proposing them costs.
struct Proposer {
  SpecMethod method = SpecMethod::kDraftModel;
  std::optional<LatencyModel> draft;
  // Prompt-lookup search cost per step, independent of proposal length.
  double lookup_ms = 0;
};

// T_draft + T_target for one decode step. Members with proposed > 0 take
// part in `proposed_len` sequential draft passes (context grows by one per
// pass and member); each member contributes verified + 1 target tokens.
// Throws Error{kMissingDraftModel} for a draft proposer without a model.
double predict_batch_latency(const LatencyModel& target,
                             const Proposer& proposer, const BatchPlan& plan,
                             int proposed_len);

// Draft-only part of predict_batch_latency.
double predict_draft_latency(const Proposer& proposer, const BatchPlan& plan,
                             int proposed_len);

// Reads `context_tokens,batched_tokens,latency_ms` rows.
std::vector<ProfileSample> load_profile_csv(const std::filesystem::path& path);

std::string fit_to_json(const FitResult& fit);
FitResult fit_from_json(const std::string& text);
FitResult load_latency_model(const std::filesystem::path& path);
void save_latency_model(const FitResult& fit, const std::filesystem::path& path);

// Desk-scale stand-in profiles shipped with the simulator. They are not
// measurements of any particular GPU; see profiles/README.md.
struct LatencyProfiles {
  LatencyModel target_decode;
  LatencyModel target_prefill;
  std::optional<LatencyModel> draft_decode;
  std::optional<LatencyModel> draft_prefill;
  // Unset means 5% of a batch-1 target decode pass.
  std::optional<double> pld_lookup_ms;

  double lookup_cost_ms() const;
  Proposer proposer(SpecMethod method) const;
};

LatencyProfiles desk_profiles();

}  // namespace specsim
