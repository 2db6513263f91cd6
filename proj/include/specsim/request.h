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
#include <optional>

#include "specsim/batch_plan.h"

namespace specsim {

enum class RequestState { kQueued, kPrefill, kDecoding, kFinished };

struct Request {
  RequestId id = 0;
  double arrival_ms = 0;
  int64_t prompt_len = 1;
  int64_t target_output_len = 1;
  int64_t generated = 0;
  int64_t context_len = 0;
  bool spec_eligible = false;
  int64_t draft_kv_len = 0;
  RequestState state = RequestState::kQueued;
  std::optional<double> finish_ms;

  // Hidden ground truth for the simulated proposer.
  double true_rate = 0.7;
  double match_prob = 0.5;
  // Index of the workload phase the request arrived in (-1 for traces).
  int phase_index = -1;

  // Filled in by the engine.
  double prefill_end_ms = 0;
  int64_t reserved_slots = 0;

  int64_t remaining() const { return target_output_len - generated; }
  int64_t draft_lag() const { return context_len - draft_kv_len; }
};

}  // namespace specsim
