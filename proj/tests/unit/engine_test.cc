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

#include "specsim/engine.h"

#include <gtest/gtest.h>

#include <vector>

#include "test_util.h"

namespace specsim {
namespace {

using testing::error_code_of;

Request make_request(double arrival_ms, int64_t prompt, int64_t output,
                     double rate = 0.7) {
  Request r;
  r.arrival_ms = arrival_ms;
  r.prompt_len = prompt;
  r.target_output_len = output;
  r.true_rate = rate;
  return r;
}

EngineConfig fixed_config(int k) {
  EngineConfig c;
  c.mode = SpecMode::fixed(k);
  return c;
}

// Admits and prefills everything that has arrived.
void admit_all(EngineState& st, const EngineConfig& cfg) {
  BatchPlan p = schedule_batch(st, cfg);
  ASSERT_EQ(p.phase, Phase::kPrefill);
  run_prefill(st, cfg, p);
}

TEST(SpecMode, NamesAndParsing) {
  EXPECT_EQ(SpecMode::adaptive().name(), "turbospec");
  EXPECT_EQ(SpecMode::none().name(), "no_spec");
  EXPECT_EQ(SpecMode::fixed(3).name(), "fixed_k(3)");
  EXPECT_EQ(SpecMode::parse("fixed_k(5)"), SpecMode::fixed(5));
  EXPECT_EQ(SpecMode::parse("fixed:2"), SpecMode::fixed(2));
  EXPECT_EQ(SpecMode::parse("turbospec"), SpecMode::adaptive());
  EXPECT_EQ(SpecMode::parse("no_spec"), SpecMode::none());
  EXPECT_EQ(error_code_of([] { SpecMode::parse("fixed_k(0)"); }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(error_code_of([] { SpecMode::parse("sometimes"); }),
            ErrorCode::kInvalidConfig);
}

TEST(ScheduleBatch, AdmitsArrivalsThenDecodes) {
  EngineConfig cfg = fixed_config(2);
  std::vector<Request> reqs{make_request(0, 10, 5), make_request(0, 20, 5),
                            make_request(0, 30, 5)};
  EngineState st = EngineState::create(cfg, reqs, 1);
  BatchPlan p = schedule_batch(st, cfg);
  EXPECT_EQ(p.phase, Phase::kPrefill);
  EXPECT_EQ(p.size(), 3u);
  EXPECT_EQ(p.batched_total(), 60);
  run_prefill(st, cfg, p);
  BatchPlan d = schedule_batch(st, cfg);
  EXPECT_EQ(d.phase, Phase::kDecode);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.context_total(), 60);
  EXPECT_EQ(d.batched_total(), 3);
}

TEST(ScheduleBatch, FutureArrivalsWait) {
  EngineConfig cfg = fixed_config(1);
  EngineState st = EngineState::create(cfg, {make_request(50, 10, 5)}, 1);
  EXPECT_TRUE(schedule_batch(st, cfg).empty());
  st.clock_ms = 50;
  EXPECT_EQ(schedule_batch(st, cfg).size(), 1u);
}

TEST(ScheduleBatch, RequestThatDoesNotFitStaysQueued) {
  EngineConfig cfg = fixed_config(0);  // reservation = prompt + output
  cfg.kv_slots = 150;
  std::vector<Request> reqs{make_request(0, 50, 50), make_request(1, 60, 10)};
  EngineState st = EngineState::create(cfg, reqs, 1);
  admit_all(st, cfg);
  st.clock_ms = std::max(st.clock_ms, 1.0);
  BatchPlan p = schedule_batch(st, cfg);
  EXPECT_EQ(p.phase, Phase::kDecode);
  EXPECT_EQ(p.members(), std::vector<RequestId>{0});
  EXPECT_EQ(st.queue.size(), 1u);
  EXPECT_EQ(st.rejected, 0);
}

TEST(ScheduleBatch, RespectsMaxBatchAndRejectsImpossibleRequests) {
  EngineConfig cfg = fixed_config(0);
  cfg.max_batch = 2;
  cfg.kv_slots = 1000;
  std::vector<Request> reqs{make_request(0, 10, 10), make_request(0, 2000, 10),
                            make_request(0, 10, 10), make_request(0, 10, 10)};
  EngineState st = EngineState::create(cfg, reqs, 1);
  BatchPlan p = schedule_batch(st, cfg);
  EXPECT_EQ(p.size(), 2u);
  EXPECT_EQ(st.rejected, 1);
  EXPECT_EQ(st.queue.size(), 1u);
}

TEST(RunPrefill, DraftPrefillAddsDraftLatency) {
  EngineConfig cfg = fixed_config(2);
  EngineState st = EngineState::create(cfg, {make_request(0, 100, 5)}, 1);
  StepOutcome out = run_prefill(st, cfg, schedule_batch(st, cfg));
  const auto& p = cfg.profiles;
  EXPECT_NEAR(out.latency_ms,
              predict_forward_time(p.target_prefill, 0, 100) +
                  predict_forward_time(*p.draft_prefill, 0, 100),
              1e-12);
  EXPECT_TRUE(out.draft_prefill_ran);
  EXPECT_EQ(out.generated_tokens, 0);
  const Request& r = st.requests[0];
  EXPECT_EQ(r.state, RequestState::kDecoding);
  EXPECT_TRUE(r.spec_eligible);
  EXPECT_EQ(r.draft_kv_len, 100);
  EXPECT_EQ(st.kv.used_target, 100);
  EXPECT_EQ(st.kv.used_draft, 100);
}

TEST(RunPrefill, SkippedDraftPrefillMarksRequestsIneligible) {
  EngineConfig cfg;  // adaptive, draft policy
  std::vector<Request> reqs{make_request(0, 100, 5), make_request(0, 100, 5),
                            make_request(0, 100, 5)};
  EngineState st = EngineState::create(cfg, reqs, 1);
  st.controller.disable_batch_size = 2;
  StepOutcome out = run_prefill(st, cfg, schedule_batch(st, cfg));
  EXPECT_FALSE(out.draft_prefill_ran);
  EXPECT_NEAR(out.latency_ms, predict_forward_time(cfg.profiles.target_prefill, 0, 300),
              1e-12);
  for (const auto& r : st.requests) EXPECT_FALSE(r.spec_eligible);
  EXPECT_EQ(st.kv.used_draft, 0);
  EXPECT_EQ(st.draft_prefill_skips, 1);
  // Ineligible members never speculate, whatever the controller thinks.
  BatchPlan d = schedule_batch(st, cfg);
  StepOutcome step = run_decode_step(st, cfg, d);
  EXPECT_EQ(step.proposed_tokens, 0);
  EXPECT_EQ(step.generated_tokens, 3);
}

TEST(RunPrefill, PromptLookupHasNoDraftComponent) {
  EngineConfig cfg;
  cfg.controller.policy = SpecMethod::kPromptLookup;
  EngineState st = EngineState::create(cfg, {make_request(0, 100, 5)}, 1);
  StepOutcome out = run_prefill(st, cfg, schedule_batch(st, cfg));
  EXPECT_FALSE(out.draft_prefill_ran);
  EXPECT_NEAR(out.latency_ms, predict_forward_time(cfg.profiles.target_prefill, 0, 100),
              1e-12);
  EXPECT_TRUE(st.requests[0].spec_eligible);
}

TEST(RunDecodeStep, CertainAcceptanceEmitsKPlusOne) {
  EngineConfig cfg = fixed_config(3);
  EngineState st = EngineState::create(cfg, {make_request(0, 100, 50, 1.0)}, 1);
  admit_all(st, cfg);
  StepOutcome out = run_decode_step(st, cfg, schedule_batch(st, cfg));
  EXPECT_EQ(out.chosen_k, 3);
  EXPECT_EQ(out.generated_tokens, 4);
  EXPECT_EQ(out.accepted_per_request, std::vector<int>{3});
  EXPECT_DOUBLE_EQ(out.acceptance_fraction, 1.0);
}

TEST(RunDecodeStep, CertainRejectionEmitsBonusOnly) {
  EngineConfig cfg = fixed_config(3);
  cfg.controller.prior_rate = 0.5;
  EngineState st = EngineState::create(cfg, {make_request(0, 100, 50, 0.0)}, 1);
  admit_all(st, cfg);
  StepOutcome out = run_decode_step(st, cfg, schedule_batch(st, cfg));
  EXPECT_EQ(out.generated_tokens, 1);
  EXPECT_DOUBLE_EQ(out.acceptance_fraction, 0.0);
  EXPECT_NEAR(st.controller.acceptance.rate, 0.9 * 0.5, 1e-12);
}

TEST(RunDecodeStep, ReproducesSeededBernoulliChain) {
  EngineConfig cfg = fixed_config(2);
  std::vector<Request> reqs{make_request(0, 40, 100, 0.7), make_request(0, 60, 100, 0.7)};
  EngineState st = EngineState::create(cfg, reqs, 1234);
  Rng oracle = st.rng;  // the engine draws nothing else for this config
  admit_all(st, cfg);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int step = 0; step < 20; ++step) {
    StepOutcome out = run_decode_step(st, cfg, schedule_batch(st, cfg));
    ASSERT_EQ(out.generated_per_request.size(), 2u);
    for (int member = 0; member < 2; ++member) {
      int m = 0;
      bool intact = true;
      for (int pos = 0; pos < 2; ++pos) {
        bool hit = unit(oracle) < 0.7;
        intact = intact && hit;
        m += intact ? 1 : 0;
      }
      EXPECT_EQ(out.generated_per_request[member], m + 1) << step << " " << member;
    }
  }
}

TEST(RunDecodeStep, DraftKvCatchUpIsOneOrTwoTokens) {
  EngineConfig cfg = fixed_config(3);
  for (double rate : {0.0, 1.0, 0.5}) {
    EngineState st = EngineState::create(cfg, {make_request(0, 64, 400, rate)}, 9);
    admit_all(st, cfg);
    for (int i = 0; i < 30; ++i) {
      StepOutcome out = run_decode_step(st, cfg, schedule_batch(st, cfg));
      const Request& r = st.requests[0];
      int expected_lag = out.accepted_per_request[0] == 3 ? 2 : 1;
      EXPECT_EQ(r.draft_lag(), expected_lag);
      EXPECT_EQ(st.kv.used_target, r.context_len);
      EXPECT_EQ(st.kv.used_draft, r.draft_kv_len);
      EXPECT_TRUE(st.kv.within_budget());
    }
  }
}

TEST(RunDecodeStep, PromptLookupUsesPerRequestMatches) {
  EngineConfig cfg = fixed_config(4);
  cfg.controller.policy = SpecMethod::kPromptLookup;
  std::vector<Request> reqs{make_request(0, 50, 100, 1.0), make_request(0, 50, 100, 1.0)};
  reqs[0].match_prob = 1.0;
  reqs[1].match_prob = 0.0;
  EngineState st = EngineState::create(cfg, reqs, 3);
  admit_all(st, cfg);
  StepOutcome out = run_decode_step(st, cfg, schedule_batch(st, cfg));
  EXPECT_EQ(out.generated_per_request, (std::vector<int>{5, 1}));
  EXPECT_EQ(out.proposed_tokens, 4);
  EXPECT_EQ(st.kv.used_draft, 0);
}

TEST(RunSimulation, EmptyScenarioGivesEmptyLog) {
  MetricsLog log = run_requests({}, EngineConfig{}, 1);
  EXPECT_TRUE(log.steps.empty());
  EXPECT_TRUE(log.requests.empty());
}

TEST(RunSimulation, EightTokensInTwoSteps) {
  EngineConfig cfg = fixed_config(3);
  MetricsLog log = run_requests({make_request(0, 32, 8, 1.0)}, cfg, 1);
  ASSERT_EQ(log.steps.size(), 3u);
  EXPECT_EQ(log.steps[0].phase, Phase::kPrefill);
  EXPECT_EQ(log.steps[1].generated_tokens, 4);
  EXPECT_EQ(log.steps[2].generated_tokens, 4);
  ASSERT_EQ(log.requests.size(), 1u);
  EXPECT_DOUBLE_EQ(log.requests[0].finish_ms, log.steps[2].clock_ms);
}

TEST(RunSimulation, OutputIsTruncatedAtTarget) {
  EngineConfig cfg = fixed_config(5);
  MetricsLog log = run_requests({make_request(0, 32, 3, 1.0)}, cfg, 1);
  ASSERT_EQ(log.steps.size(), 2u);
  EXPECT_EQ(log.steps[1].generated_tokens, 3);
}

TEST(RunSimulation, FixedZeroMatchesNoSpec) {
  Scenario s;
  s.phases.push_back({20, 3, builtin_dataset("sonnet")});
  EngineConfig a = fixed_config(0), b;
  b.mode = SpecMode::none();
  MetricsLog la = run_simulation(s, a, 5), lb = run_simulation(s, b, 5);
  ASSERT_EQ(la.steps.size(), lb.steps.size());
  for (size_t i = 0; i < la.steps.size(); ++i) {
    EXPECT_DOUBLE_EQ(la.steps[i].clock_ms, lb.steps[i].clock_ms);
    EXPECT_EQ(la.steps[i].generated_tokens, lb.steps[i].generated_tokens);
  }
  EXPECT_EQ(la.draft_prefill_runs, 0);
}

TEST(RunSimulation, InvariantsHold) {
  Scenario s;
  s.phases.push_back({30, 8, builtin_dataset("sharegpt")});
  for (SpecMode mode : {SpecMode::adaptive(), SpecMode::fixed(4), SpecMode::none()}) {
    EngineConfig cfg;
    cfg.mode = mode;
    cfg.kv_slots = 60000;
    MetricsLog log = run_simulation(s, cfg, 21);
    double clock = 0;
    int64_t generated = 0;
    for (const auto& st : log.steps) {
      EXPECT_GT(st.clock_ms, clock);
      EXPECT_GT(st.latency_ms, 0);
      clock = st.clock_ms;
      generated += st.generated_tokens;
      if (st.phase == Phase::kDecode) {
        EXPECT_GE(st.generated_tokens, st.batch_size);
        for (int g : st.generated_per_request) {
          EXPECT_GE(g, 1);
          EXPECT_LE(g, st.chosen_k + 1);
        }
      }
    }
    int64_t expected = 0;
    for (const auto& r : log.requests) {
      EXPECT_GE(r.finish_ms, r.arrival_ms);
      expected += r.output_len;
    }
    EXPECT_EQ(log.unfinished_requests, 0);
    EXPECT_EQ(generated, expected) << mode.name();
  }
}

TEST(RunSimulation, HorizonStopsEarlyWithFlag) {
  Scenario s;
  s.phases.push_back({10, 20, builtin_dataset("sharegpt")});
  s.horizon_s = 10;
  MetricsLog log = run_simulation(s, EngineConfig{}, 2);
  EXPECT_TRUE(log.horizon_exceeded);
  EXPECT_GT(log.unfinished_requests, 0);
  EXPECT_LE(log.steps.back().clock_ms - log.steps.back().latency_ms, 10000.0);
}

TEST(RunSimulation, FavorableRegimeSpeedsUpSingleStreams) {
  // Widely spaced arrivals keep the batch at one request.
  std::vector<Request> reqs;
  for (int i = 0; i < 20; ++i) reqs.push_back(make_request(i * 5000.0, 128, 200, 0.9));
  EngineConfig base;
  base.mode = SpecMode::none();
  MetricsLog slow = run_requests(reqs, base, 4);
  MetricsLog fast = run_requests(reqs, EngineConfig{}, 4);
  EXPECT_GT(compute_speedup(slow, fast), 1.5);
}

TEST(EngineConfig, DraftPolicyNeedsDraftProfile) {
  EngineConfig cfg;
  cfg.profiles.draft_decode.reset();
  EXPECT_EQ(error_code_of([&] { cfg.validate(); }), ErrorCode::kMissingDraftModel);
  cfg.mode = SpecMode::none();
  EXPECT_NO_THROW(cfg.validate());
}

}  // namespace
}  // namespace specsim
