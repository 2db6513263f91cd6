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

#include "specsim/batch_plan.h"

#include <algorithm>
#include <string>

#include "specsim/error.h"

namespace specsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kDegenerateDesign: return "DegenerateDesign";
    case ErrorCode::kMissingDraftModel: return "MissingDraftModel";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kKvOverflow: return "KvOverflow";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::kNoFinishedRequests: return "NoFinishedRequests";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

std::string_view to_string(SpecMethod method) {
  return method == SpecMethod::kDraftModel ? "draft" : "pld";
}

SpecMethod spec_method_from_string(std::string_view name) {
  if (name == "draft" || name == "draft_model") return SpecMethod::kDraftModel;
  if (name == "pld" || name == "prompt_lookup") {
    return SpecMethod::kPromptLookup;
  }
  throw Error(ErrorCode::kInvalidConfig,
              "unknown policy '" + std::string(name) +
                  "' (expected draft or pld)");
}

int64_t BatchPlan::context_total() const {
  if (phase == Phase::kPrefill) return 0;
  int64_t total = 0;
  for (const auto& e : entries) total += e.context_len;
  return total;
}

int64_t BatchPlan::batched_total() const {
  int64_t total = 0;
  for (const auto& e : entries) {
    total += phase == Phase::kPrefill ? e.prompt_len : e.verified + 1;
  }
  return total;
}

std::vector<RequestId> BatchPlan::members() const {
  std::vector<RequestId> ids;
  ids.reserve(entries.size());
  for (const auto& e : entries) ids.push_back(e.id);
  return ids;
}

std::vector<int> BatchPlan::per_request_proposed() const {
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.proposed);
  return out;
}

int BatchPlan::eligible_count() const {
  return static_cast<int>(std::count_if(
      entries.begin(), entries.end(),
      [](const PlanEntry& e) { return e.spec_eligible; }));
}

BatchPlan with_uniform_proposal(const BatchPlan& plan, int k) {
  BatchPlan out = plan;
  for (auto& e : out.entries) {
    e.proposed = e.spec_eligible ? k : 0;
    e.verified = e.proposed;
  }
  return out;
}

}  // namespace specsim
