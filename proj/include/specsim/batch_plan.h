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
#include <string_view>
#include <vector>

namespace specsim {

using RequestId = int64_t;

enum class SpecMethod { kDraftModel, kPromptLookup };

std::string_view to_string(SpecMethod method);
SpecMethod spec_method_from_string(std::string_view name);

enum class Phase { kPrefill, kDecode };

// One request's slot in an engine step.
struct PlanEntry {
  RequestId id = 0;
  // Tokens whose target KV is already stored.
  int64_t context_len = 0;
  int64_t prompt_len = 0;
  // Tokens the draft model has not processed yet; its first draft pass
  // consumes max(1, draft_lag) of them.
  int64_t draft_lag = 0;
  bool spec_eligible = false;
  int proposed = 0;
  int verified = 0;
};

struct BatchPlan {
  int64_t step_index = 0;
  Phase phase = Phase::kDecode;
  std::vector<PlanEntry> entries;

  size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  // Sum of N_context over members. Zero for prefill plans.
  int64_t context_total() const;
  // Decode: sum of (verified + 1). Prefill: sum of prompt lengths.
  int64_t batched_total() const;

  std::vector<RequestId> members() const;
  std::vector<int> per_request_proposed() const;
  int eligible_count() const;
};

// Copy of `plan` where every speculation-eligible member proposes and
// verifies `k` tokens and everyone else proposes nothing.
BatchPlan with_uniform_proposal(const BatchPlan& plan, int k);

}  // namespace specsim
