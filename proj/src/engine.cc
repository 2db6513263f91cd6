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

#include <algorithm>
#include <cmath>
#include <regex>
#include <string>

#include "specsim/error.h"

namespace specsim {
namespace {

constexpr uint64_t kEngineStream = 0x9E3779B97F4A7C15ULL;

double noise_multiplier(EngineState& state, const EngineConfig& config) {
  if (config.latency_noise_sigma <= 0) return 1.0;
  std::normal_distribution<double> z(0.0, 1.0);
  const double s = config.latency_noise_sigma;
  return std::exp(s * z(state.rng) - 0.5 * s * s);
}

void check_budget(const EngineState& state, const char* where) {
  if (!state.kv.within_budget()) {
    throw Error(ErrorCode::kKvOverflow,
                std::string(where) + ": used " +
                    std::to_string(state.kv.used_target) + " target + " +
                    std::to_string(state.kv.used_draft) + " draft of " +
                    std::to_string(state.kv.total_slots) + " slots");
  }
}

// Largest k <= limit whose KV needs fit in the free slots.
int largest_feasible_k(const BatchPlan& plan, SpecMethod method, int limit,
                       const KvBudget& kv) {
  for (int k = limit; k > 0; --k) {
    if (kv_tokens_needed(plan, method, k) <= kv.free_slots()) return k;
  }
  return 0;
}

void finish_request(EngineState& state, Request& r) {
  r.state = RequestState::kFinished;
  r.finish_ms = state.clock_ms;
  state.kv.used_target -= r.context_len;
  state.kv.used_draft -= r.draft_kv_len;
  state.reserved_slots -= r.reserved_slots;
  ++state.finished;
  state.records.push_back({r.id, r.arrival_ms, state.clock_ms,
                           state.clock_ms - r.arrival_ms, r.prompt_len,
                           r.target_output_len, r.phase_index});
}

// Target KV slots needed when each member verifies min(v, its proposal).
int64_t verify_slots(const BatchPlan& plan, int v) {
  int64_t total = 0;
  for (const auto& e : plan.entries) total += std::min(v, e.proposed) + 1;
  return total;
}

}  // namespace

std::string SpecMode::name() const {
  switch (kind) {
    case Kind::kAdaptive: return "turbospec";
    case Kind::kFixed: return "fixed_k(" + std::to_string(k) + ")";
    case Kind::kNone: return "no_spec";
  }
  return "no_spec";
}

SpecMode SpecMode::parse(const std::string& text) {
  if (text == "turbospec" || text == "adaptive") return adaptive();
  if (text == "no_spec" || text == "none") return none();
  static const std::regex fixed_re(R"(fixed(?:_k)?(?:\((\d+)\)|[:=](\d+)))");
  std::smatch m;
  if (std::regex_match(text, m, fixed_re)) {
    int k = std::stoi(m[1].matched ? m[1].str() : m[2].str());
    if (k < 1) {
      throw Error(ErrorCode::kInvalidConfig, "fixed_k requires k >= 1");
    }
    return fixed(k);
  }
  throw Error(ErrorCode::kInvalidConfig,
              "unknown mode '" + text +
                  "' (expected turbospec, no_spec or fixed_k(K))");
}

void EngineConfig::validate() const {
  controller.validate();
  if (max_batch < 1) {
    throw Error(ErrorCode::kInvalidConfig, "max_batch must be >= 1");
  }
  if (kv_slots < 1) {
    throw Error(ErrorCode::kInvalidConfig, "kv_slots must be >= 1");
  }
  if (latency_noise_sigma < 0) {
    throw Error(ErrorCode::kInvalidConfig, "latency_noise_sigma must be >= 0");
  }
  if (mode.kind == SpecMode::Kind::kFixed && mode.k < 0) {
    throw Error(ErrorCode::kInvalidConfig, "fixed k must be >= 0");
  }
  if (uses_draft_model() && !profiles.draft_decode) {
    throw Error(ErrorCode::kMissingDraftModel,
                "draft policy needs a draft latency profile");
  }
}

EngineState EngineState::create(const EngineConfig& config,
                                std::vector<Request> requests, uint64_t seed) {
  EngineState s;
  std::stable_sort(requests.begin(), requests.end(),
                   [](const Request& a, const Request& b) {
                     return a.arrival_ms < b.arrival_ms;
                   });
  for (size_t i = 0; i < requests.size(); ++i) {
    auto& r = requests[i];
    r.id = static_cast<RequestId>(i);
    r.generated = 0;
    r.context_len = 0;
    r.draft_kv_len = 0;
    r.spec_eligible = false;
    r.state = RequestState::kQueued;
    r.finish_ms.reset();
  }
  s.requests = std::move(requests);
  s.kv.total_slots = config.kv_slots;
  s.controller = ControllerState::initial(config.controller);
  s.rng.seed(seed ^ kEngineStream);
  return s;
}

int64_t reservation_for(const Request& request, const EngineConfig& config) {
  int64_t footprint = request.prompt_len + request.target_output_len;
  return config.uses_draft_model() ? 2 * footprint : footprint;
}

BatchPlan schedule_batch(EngineState& state, const EngineConfig& config) {
  while (state.next_arrival < state.requests.size() &&
         state.requests[state.next_arrival].arrival_ms <= state.clock_ms) {
    state.queue.push_back(state.requests[state.next_arrival].id);
    ++state.next_arrival;
  }

  BatchPlan plan;
  plan.step_index = state.step_index;

  while (!state.queue.empty() &&
         static_cast<int64_t>(state.active.size()) < config.max_batch) {
    Request& r = state.requests[static_cast<size_t>(state.queue.front())];
    int64_t need = reservation_for(r, config);
    if (need > state.kv.total_slots) {
      // Could never fit; drop instead of blocking the queue forever.
      state.queue.pop_front();
      r.state = RequestState::kFinished;
      ++state.rejected;
      continue;
    }
    if (state.reserved_slots + need > state.kv.total_slots) break;
    state.queue.pop_front();
    r.state = RequestState::kPrefill;
    r.reserved_slots = need;
    state.reserved_slots += need;
    state.active.push_back(r.id);
  }

  bool any_prefill = false;
  for (RequestId id : state.active) {
    if (state.requests[static_cast<size_t>(id)].state == RequestState::kPrefill) {
      any_prefill = true;
      break;
    }
  }
  plan.phase = any_prefill ? Phase::kPrefill : Phase::kDecode;
  for (RequestId id : state.active) {
    const Request& r = state.requests[static_cast<size_t>(id)];
    bool wanted = any_prefill ? r.state == RequestState::kPrefill
                              : r.state == RequestState::kDecoding;
    if (!wanted) continue;
    PlanEntry e;
    e.id = r.id;
    e.context_len = r.context_len;
    e.prompt_len = r.prompt_len;
    e.spec_eligible = r.spec_eligible && config.mode.speculates();
    e.draft_lag = config.uses_draft_model() && r.spec_eligible ? r.draft_lag() : 0;
    plan.entries.push_back(e);
  }
  return plan;
}

StepOutcome run_prefill(EngineState& state, const EngineConfig& config,
                        const BatchPlan& plan) {
  const bool draft_model = config.uses_draft_model();
  bool run_draft = false;
  if (draft_model) {
    if (config.mode.kind == SpecMode::Kind::kAdaptive) {
      // Load seen by the threshold: the running batch plus arrivals still
      // waiting for a slot. Under saturation the running batch sits at
      // max_batch and could never exceed a threshold recorded there.
      const auto demand =
          static_cast<int64_t>(state.active.size() + state.queue.size());
      run_draft = on_prefill(state.controller, config.controller, demand) ==
                  PrefillDecision::kRunDraftPrefill;
    } else {
      run_draft = true;
    }
  }

  const auto prompt_tokens = static_cast<double>(plan.batched_total());
  double latency =
      predict_forward_time(config.profiles.target_prefill, 0, prompt_tokens);
  if (run_draft) {
    const auto& draft = config.profiles.draft_prefill
                            ? *config.profiles.draft_prefill
                            : *config.profiles.draft_decode;
    latency += predict_forward_time(draft, 0, prompt_tokens);
    ++state.draft_prefill_runs;
  } else if (draft_model) {
    ++state.draft_prefill_skips;
  }
  latency *= noise_multiplier(state, config);
  state.clock_ms += latency;

  for (const auto& e : plan.entries) {
    Request& r = state.requests[static_cast<size_t>(e.id)];
    r.state = RequestState::kDecoding;
    r.context_len = r.prompt_len;
    r.prefill_end_ms = state.clock_ms;
    state.kv.used_target += r.prompt_len;
    if (draft_model) {
      r.spec_eligible = run_draft;
      if (run_draft) {
        r.draft_kv_len = r.prompt_len;
        state.kv.used_draft += r.prompt_len;
      } else {
        // No draft KV will ever exist for this request.
        int64_t released = r.prompt_len + r.target_output_len;
        r.reserved_slots -= released;
        state.reserved_slots -= released;
      }
    } else {
      r.spec_eligible = config.mode.speculates();
    }
  }
  check_budget(state, "prefill");

  StepOutcome out;
  out.step_index = state.step_index++;
  out.phase = Phase::kPrefill;
  out.clock_ms = state.clock_ms;
  out.batch_size = static_cast<int64_t>(plan.size());
  out.latency_ms = latency;
  out.acceptance_estimate = state.controller.acceptance.rate;
  out.eligible_count = plan.eligible_count();
  out.draft_prefill_ran = run_draft;
  return out;
}

StepOutcome run_decode_step(EngineState& state, const EngineConfig& config,
                            const BatchPlan& plan) {
  const ControllerConfig& cc = config.controller;
  const SpecMethod method = cc.policy;
  const Proposer proposer = config.profiles.proposer(method);
  const LatencyModel& target = config.profiles.target_decode;
  const int eligible = plan.eligible_count();
  const bool adaptive = config.mode.kind == SpecMode::Kind::kAdaptive;

  // (1) proposal length
  int proposed_len = 0;
  SpecDecision decision;
  if (config.mode.speculates() && eligible > 0) {
    if (adaptive) {
      if (method == SpecMethod::kPromptLookup) {
        proposed_len = cc.fixed_pld_len;
      } else {
        decision = argmax_goodput(state.controller, cc, target, proposer, plan,
                                  state.kv);
        proposed_len = decision.proposed_len;
      }
    } else {
      proposed_len =
          largest_feasible_k(plan, method, config.mode.k, state.kv);
    }
  }
  decision.proposed_len = proposed_len;
  if (adaptive && config.mode.speculates()) {
    on_decision(state.controller, cc, decision,
                static_cast<int64_t>(plan.size()), eligible > 0);
  }

  // (2)-(3) proposals and verification length
  BatchPlan work = plan;
  int verification_len = 0;
  if (proposed_len > 0) {
    if (method == SpecMethod::kPromptLookup) {
      std::vector<double> probs;
      for (const auto& e : work.entries) {
        probs.push_back(
            e.spec_eligible ? state.requests[static_cast<size_t>(e.id)].match_prob
                            : 0.0);
      }
      auto proposals = propose_pld(state.rng, proposed_len, probs);
      for (size_t i = 0; i < work.entries.size(); ++i) {
        work.entries[i].proposed = proposals[i];
        work.entries[i].verified = 0;
      }
      if (adaptive) {
        verification_len = get_verification_len(state.controller, cc, target,
                                                proposer, work, proposed_len,
                                                state.kv);
      } else {
        verification_len = proposed_len;
        while (verification_len > 0 &&
               verify_slots(work, verification_len) > state.kv.free_slots()) {
          --verification_len;
        }
      }
    } else {
      work = with_uniform_proposal(plan, proposed_len);
      verification_len = get_verification_len(state.controller, cc, target,
                                              proposer, work, proposed_len,
                                              state.kv);
    }
    for (auto& e : work.entries) e.verified = std::min(verification_len, e.proposed);
  }

  int64_t scratch = 0;
  for (const auto& e : work.entries) {
    scratch += e.verified + 1;
    if (method == SpecMethod::kDraftModel && e.proposed > 0) {
      scratch += std::max<int64_t>(1, e.draft_lag) + e.proposed - 1;
    }
  }
  if (scratch > state.kv.free_slots()) {
    throw Error(ErrorCode::kKvOverflow,
                "decode step needs " + std::to_string(scratch) +
                    " slots, only " + std::to_string(state.kv.free_slots()) +
                    " free");
  }

  // (5) latency
  double latency = predict_batch_latency(target, proposer, work, proposed_len);
  latency *= noise_multiplier(state, config);
  state.clock_ms += latency;

  // (4) acceptance and (7) KV bookkeeping
  StepOutcome out;
  out.phase = Phase::kDecode;
  out.batch_size = static_cast<int64_t>(work.size());
  out.latency_ms = latency;
  out.chosen_k = method == SpecMethod::kDraftModel ? proposed_len : verification_len;
  out.verification_len = verification_len;
  out.eligible_count = eligible;
  out.predicted_goodput = decision.predicted_goodput;
  out.accepted_per_request.reserve(work.size());
  out.generated_per_request.reserve(work.size());

  int64_t matched = 0;
  int64_t verified = 0;
  const bool draft_kv = config.uses_draft_model();
  for (const auto& e : work.entries) {
    Request& r = state.requests[static_cast<size_t>(e.id)];
    int accepted = 0;
    if (e.verified > 0) {
      AcceptanceDraw draw = sample_acceptance(state.rng, r.true_rate,
                                              e.verified, config.position_rate);
      accepted = draw.accepted;
      matched += draw.matched;
      verified += e.verified;
    }
    const int64_t generated = std::min<int64_t>(accepted + 1, r.remaining());
    const int64_t old_context = r.context_len;
    r.generated += generated;
    r.context_len += generated;
    state.kv.used_target += generated;
    if (draft_kv && r.spec_eligible && e.proposed > 0) {
      // Draft KV now covers the old context plus proposals 1..k-1; keep only
      // the accepted ones. Full acceptance leaves two tokens to catch up.
      int64_t valid =
          old_context + std::min<int64_t>(accepted, e.proposed - 1);
      valid = std::min(valid, r.context_len);
      state.kv.used_draft += valid - r.draft_kv_len;
      r.draft_kv_len = valid;
    }
    out.accepted_per_request.push_back(accepted);
    out.generated_per_request.push_back(static_cast<int>(generated));
    out.generated_tokens += generated;
    out.proposed_tokens += e.proposed;
    out.verified_tokens += e.verified;
    out.accepted_tokens += accepted;
  }
  check_budget(state, "decode");

  // (6) acceptance estimate
  if (verified > 0) {
    out.acceptance_fraction =
        static_cast<double>(matched) / static_cast<double>(verified);
    state.controller.acceptance =
        update_acceptance(state.controller.acceptance, out.acceptance_fraction);
  }

  // (8) completion
  std::vector<RequestId> still_active;
  still_active.reserve(state.active.size());
  for (RequestId id : state.active) {
    Request& r = state.requests[static_cast<size_t>(id)];
    if (r.state == RequestState::kDecoding && r.remaining() == 0) {
      finish_request(state, r);
    } else {
      still_active.push_back(id);
    }
  }
  state.active = std::move(still_active);

  out.step_index = state.step_index++;
  out.clock_ms = state.clock_ms;
  out.realized_goodput =
      latency > 0 ? 1000.0 * static_cast<double>(out.generated_tokens) / latency
                  : 0.0;
  out.acceptance_estimate = state.controller.acceptance.rate;
  return out;
}

MetricsLog run_requests(std::vector<Request> requests,
                        const EngineConfig& config, uint64_t seed,
                        double horizon_s) {
  config.validate();
  EngineState state = EngineState::create(config, std::move(requests), seed);
  MetricsLog log;
  const double horizon_ms = horizon_s * 1000.0;
  while (!state.done()) {
    if (horizon_ms > 0 && state.clock_ms >= horizon_ms) {
      log.horizon_exceeded = true;
      break;
    }
    BatchPlan plan = schedule_batch(state, config);
    if (plan.empty()) {
      if (state.active.empty() && state.queue.empty() &&
          state.next_arrival < state.requests.size()) {
        state.clock_ms = std::max(
            state.clock_ms, state.requests[state.next_arrival].arrival_ms);
        continue;
      }
      if (state.done()) break;
      throw Error(ErrorCode::kInvalidConfig,
                  "scheduler stalled with queued requests");
    }
    log.steps.push_back(plan.phase == Phase::kPrefill
                            ? run_prefill(state, config, plan)
                            : run_decode_step(state, config, plan));
  }

  log.requests = std::move(state.records);
  log.draft_prefill_runs = state.draft_prefill_runs;
  log.draft_prefill_skips = state.draft_prefill_skips;
  log.rejected_requests = state.rejected;
  log.unfinished_requests = static_cast<int64_t>(state.requests.size()) -
                            state.finished - state.rejected;

  const auto& cc = config.controller;
  log.add_meta("seed", std::to_string(seed));
  log.add_meta("mode", config.mode.name());
  log.add_meta("policy", std::string(to_string(cc.policy)));
  log.add_meta("max_len", std::to_string(cc.max_len));
  log.add_meta("fixed_pld_len", std::to_string(cc.fixed_pld_len));
  log.add_meta("reset_period", std::to_string(cc.reset_period));
  log.add_meta("ewma_decay", format_double(cc.ewma_decay));
  log.add_meta("prior_rate", format_double(cc.prior_rate));
  log.add_meta("prefill_disabling", cc.prefill_disabling ? "true" : "false");
  log.add_meta("max_batch", std::to_string(config.max_batch));
  log.add_meta("kv_slots", std::to_string(config.kv_slots));
  log.add_meta("latency_noise_sigma", format_double(config.latency_noise_sigma));
  log.add_meta("target_profile", config.profiles.target_decode.profile_id);
  log.add_meta("draft_profile", config.profiles.draft_decode
                                    ? config.profiles.draft_decode->profile_id
                                    : std::string("none"));
  log.add_meta("requests", std::to_string(state.requests.size()));
  log.add_meta("finished", std::to_string(state.finished));
  log.add_meta("unfinished", std::to_string(log.unfinished_requests));
  log.add_meta("rejected", std::to_string(state.rejected));
  log.add_meta("steps", std::to_string(log.steps.size()));
  log.add_meta("draft_prefill_runs", std::to_string(state.draft_prefill_runs));
  log.add_meta("draft_prefill_skips", std::to_string(state.draft_prefill_skips));
  log.add_meta("horizon_exceeded", log.horizon_exceeded ? "true" : "false");
  return log;
}

MetricsLog run_simulation(const Scenario& scenario, const EngineConfig& config,
                          uint64_t seed) {
  scenario.validate();
  std::vector<Request> requests;
  if (scenario.trace) {
    requests = load_trace(*scenario.trace, config.controller.pld_match_prob);
  } else {
    Rng rng(seed);
    requests = generate_arrivals(scenario, rng);
  }
  MetricsLog log = run_requests(std::move(requests), config, seed,
                                scenario.horizon_s);
  log.meta.insert(log.meta.begin(), {"scenario", scenario.name});
  return log;
}

}  // namespace specsim
