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

#include "specsim/latency_model.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "test_util.h"

namespace specsim {
namespace {

using testing::decode_plan;
using testing::error_code_of;

const LatencyModel kTarget{0.001, 0.05, 2.0, "t"};
const LatencyModel kDraft{0.0001, 0.005, 0.2, "d"};

std::vector<ProfileSample> planted_grid(double c, double t, double f) {
  std::vector<ProfileSample> out;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      double ctx = 400.0 * i, tok = 1 + 50.0 * j;
      out.push_back({ctx, tok, c * ctx + t * tok + f});
    }
  }
  return out;
}

TEST(FitLatencyModel, RecoversPlantedCoefficientsExactly) {
  auto samples = planted_grid(0.001, 0.05, 2.0);
  FitResult fit = fit_latency_model(samples, "planted");
  EXPECT_NEAR(fit.model.ctx_coeff, 0.001, 1e-9);
  EXPECT_NEAR(fit.model.tok_coeff, 0.05, 1e-9);
  EXPECT_NEAR(fit.model.fixed_cost, 2.0, 1e-9);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  EXPECT_EQ(fit.model.profile_id, "planted");
  for (const auto& s : samples) {
    EXPECT_NEAR(predict_forward_time(fit.model, s.context_tokens, s.batched_tokens),
                s.latency_ms, 1e-9);
  }
}

TEST(FitLatencyModel, ConstantLatencyGivesInterceptOnly) {
  auto samples = planted_grid(0, 0, 3.0);
  FitResult fit = fit_latency_model(samples, "flat");
  EXPECT_NEAR(fit.model.ctx_coeff, 0, 1e-12);
  EXPECT_NEAR(fit.model.tok_coeff, 0, 1e-12);
  EXPECT_NEAR(fit.model.fixed_cost, 3.0, 1e-12);
}

TEST(FitLatencyModel, NoisySamplesWithinFivePercent) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uc(0, 4000), ub(1, 512);
  std::normal_distribution<double> noise(0, 0.01);
  std::vector<ProfileSample> samples;
  for (int i = 0; i < 200; ++i) {
    double c = uc(rng), b = std::round(ub(rng));
    samples.push_back({c, b, 0.001 * c + 0.05 * b + 2.0 + noise(rng)});
  }
  FitResult fit = fit_latency_model(samples, "noisy");
  EXPECT_NEAR(fit.model.ctx_coeff, 0.001, 0.05 * 0.001);
  EXPECT_NEAR(fit.model.tok_coeff, 0.05, 0.05 * 0.05);
  EXPECT_NEAR(fit.model.fixed_cost, 2.0, 0.05 * 2.0);
  EXPECT_GT(fit.r_squared, 0.999);
}

TEST(FitLatencyModel, NegativeSlopeIsClampedAndRefit) {
  // Latency falls with context: OLS gives a negative ctx slope. The clamped
  // fit must equal plain OLS of latency on (batched, 1) alone.
  std::vector<ProfileSample> samples;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 4; ++j) {
      double c = 100.0 * i, b = 1.0 + 10 * j;
      samples.push_back({c, b, 5.0 - 0.002 * c + 0.1 * b + 0.01 * ((i * 7 + j) % 3)});
    }
  }
  FitResult fit = fit_latency_model(samples, "clamped");
  EXPECT_EQ(fit.model.ctx_coeff, 0.0);

  // Oracle: closed-form simple regression of latency on batched tokens.
  double n = static_cast<double>(samples.size()), sb = 0, sl = 0, sbb = 0, sbl = 0;
  for (const auto& s : samples) {
    sb += s.batched_tokens;
    sl += s.latency_ms;
    sbb += s.batched_tokens * s.batched_tokens;
    sbl += s.batched_tokens * s.latency_ms;
  }
  double slope = (n * sbl - sb * sl) / (n * sbb - sb * sb);
  double icpt = (sl - slope * sb) / n;
  EXPECT_NEAR(fit.model.tok_coeff, slope, 1e-9);
  EXPECT_NEAR(fit.model.fixed_cost, icpt, 1e-9);
}

TEST(FitLatencyModel, Errors) {
  std::vector<ProfileSample> two{{0, 1, 1}, {1, 2, 2}};
  EXPECT_EQ(error_code_of([&] { fit_latency_model(two, "x"); }),
            ErrorCode::kTooFewSamples);
  // Batched tokens is a multiple of context: collinear columns.
  std::vector<ProfileSample> collinear;
  for (int i = 1; i <= 6; ++i) collinear.push_back({2.0 * i, 1.0 * i, 1.0 + i});
  EXPECT_EQ(error_code_of([&] { fit_latency_model(collinear, "x"); }),
            ErrorCode::kDegenerateDesign);
}

TEST(PredictForwardTime, Examples) {
  EXPECT_DOUBLE_EQ(predict_forward_time(kTarget, 0, 0), 2.0);
  EXPECT_NEAR(predict_forward_time(kTarget, 1000, 100), 8.0, 1e-12);
  EXPECT_NEAR(predict_forward_time(kTarget, 1000, 200) -
                  predict_forward_time(kTarget, 1000, 100),
              5.0, 1e-12);
}

TEST(PredictBatchLatency, NoProposalIsTargetOnly) {
  BatchPlan plan = decode_plan(4, 100);
  Proposer p{SpecMethod::kDraftModel, kDraft, 0};
  EXPECT_NEAR(predict_batch_latency(kTarget, p, plan, 0),
              predict_forward_time(kTarget, 400, 4), 1e-12);
  // Without a draft model and k = 0, nothing needs the draft.
  Proposer none{SpecMethod::kDraftModel, std::nullopt, 0};
  EXPECT_NEAR(predict_batch_latency(kTarget, none, plan, 0),
              predict_forward_time(kTarget, 400, 4), 1e-12);
}

TEST(PredictBatchLatency, DraftPassesGrowContext) {
  BatchPlan plan = with_uniform_proposal(decode_plan(1, 100), 2);
  Proposer p{SpecMethod::kDraftModel, kDraft, 0};
  // [1e-4*100 + 0.005 + 0.2] + [1e-4*101 + 0.005 + 0.2] + [0.1 + 0.15 + 2]
  EXPECT_NEAR(predict_draft_latency(p, plan, 2), 0.2150 + 0.2151, 1e-12);
  EXPECT_NEAR(predict_batch_latency(kTarget, p, plan, 2), 2.6801, 1e-12);
}

TEST(PredictBatchLatency, PromptLookupCostIsConstant) {
  Proposer p{SpecMethod::kPromptLookup, std::nullopt, 0.05};
  for (int k : {1, 3, 7}) {
    BatchPlan plan = with_uniform_proposal(decode_plan(3, 50), k);
    EXPECT_NEAR(predict_draft_latency(p, plan, k), 0.05, 1e-12);
  }
}

TEST(PredictBatchLatency, MissingDraftModel) {
  BatchPlan plan = with_uniform_proposal(decode_plan(1, 10), 2);
  Proposer p{SpecMethod::kDraftModel, std::nullopt, 0};
  EXPECT_EQ(error_code_of([&] { predict_batch_latency(kTarget, p, plan, 2); }),
            ErrorCode::kMissingDraftModel);
}

TEST(PredictBatchLatency, MonotoneInProposalLength) {
  Proposer p{SpecMethod::kDraftModel, kDraft, 0};
  double prev = 0;
  for (int k = 0; k <= 10; ++k) {
    double t = predict_batch_latency(kTarget, p, with_uniform_proposal(decode_plan(5, 300), k), k);
    EXPECT_GE(t, prev);
    prev = t;
  }
}

TEST(LatencyModelIo, CsvAndJsonRoundTrip) {
  auto dir = testing::scratch_dir("latency_io");
  std::string csv = "context_tokens,batched_tokens,latency_ms\n";
  for (const auto& s : planted_grid(0.002, 0.04, 1.5)) {
    csv += std::to_string(s.context_tokens) + "," + std::to_string(s.batched_tokens) +
           "," + std::to_string(s.latency_ms) + "\n";
  }
  testing::write_file(dir / "p.csv", csv);
  FitResult fit = fit_latency_model(load_profile_csv(dir / "p.csv"), "p");
  save_latency_model(fit, dir / "p.json");
  FitResult back = load_latency_model(dir / "p.json");
  EXPECT_EQ(back.model.profile_id, "p");
  EXPECT_DOUBLE_EQ(back.model.ctx_coeff, fit.model.ctx_coeff);
  EXPECT_DOUBLE_EQ(back.model.tok_coeff, fit.model.tok_coeff);
  EXPECT_DOUBLE_EQ(back.model.fixed_cost, fit.model.fixed_cost);
  EXPECT_DOUBLE_EQ(back.r_squared, fit.r_squared);
}

TEST(LatencyModelIo, CsvErrors) {
  auto dir = testing::scratch_dir("latency_csv_errors");
  testing::write_file(dir / "bad_header.csv", "a,b,c\n1,2,3\n");
  testing::write_file(dir / "bad_value.csv",
                      "context_tokens,batched_tokens,latency_ms\n1,2,x\n");
  testing::write_file(dir / "bad_range.csv",
                      "context_tokens,batched_tokens,latency_ms\n1,0,3\n");
  EXPECT_EQ(error_code_of([&] { load_profile_csv(dir / "bad_header.csv"); }),
            ErrorCode::kParseError);
  EXPECT_EQ(error_code_of([&] { load_profile_csv(dir / "bad_value.csv"); }),
            ErrorCode::kParseError);
  EXPECT_EQ(error_code_of([&] { load_profile_csv(dir / "bad_range.csv"); }),
            ErrorCode::kValueOutOfRange);
  EXPECT_EQ(error_code_of([&] { load_profile_csv(dir / "missing.csv"); }),
            ErrorCode::kIoError);
}

TEST(LatencyProfiles, LookupCostDefaultsToFivePercentOfTargetPass) {
  LatencyProfiles p = desk_profiles();
  EXPECT_NEAR(p.lookup_cost_ms(), 0.05 * predict_forward_time(p.target_decode, 0, 1),
              1e-12);
  p.pld_lookup_ms = 0.3;
  EXPECT_DOUBLE_EQ(p.proposer(SpecMethod::kPromptLookup).lookup_ms, 0.3);
}

}  // namespace
}  // namespace specsim
