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

#include "specsim/speculation.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "specsim/error.h"

namespace specsim {

double expected_generated_length(double rate, int k) {
  // Horner form of 1 + r + ... + r^k. The closed form (1 - r^(k+1)) / (1 - r)
  // cancels badly as r approaches 1.
  rate = std::clamp(rate, 0.0, 1.0);
  double sum = 1.0;
  for (int j = 0; j < k; ++j) sum = 1.0 + rate * sum;
  return sum;
}

double expected_batch_tokens(std::span<const double> rates,
                             std::span<const int> ks) {
  if (rates.size() != ks.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(rates.size()) + " rates vs " +
                    std::to_string(ks.size()) + " proposal lengths");
  }
  double total = 0;
  for (size_t i = 0; i < rates.size(); ++i) {
    total += expected_generated_length(rates[i], ks[i]);
  }
  return total;
}

AcceptanceDraw sample_acceptance(Rng& rng, double true_rate, int k,
                                 const PositionRate& position_rate) {
  AcceptanceDraw draw;
  bool run_intact = true;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int pos = 0; pos < k; ++pos) {
    double p = position_rate ? position_rate(pos, true_rate) : true_rate;
    bool hit = unit(rng) < p;
    if (hit) {
      ++draw.matched;
      if (run_intact) ++draw.accepted;
    } else {
      run_intact = false;
    }
  }
  return draw;
}

int sample_accepted_count(Rng& rng, double true_rate, int k) {
  return sample_acceptance(rng, true_rate, k).accepted;
}

AcceptanceEstimate update_acceptance(const AcceptanceEstimate& est,
                                     double step_rate) {
  AcceptanceEstimate next = est;
  step_rate = std::clamp(step_rate, 0.0, 1.0);
  next.rate = std::clamp(est.decay * est.rate + (1.0 - est.decay) * step_rate,
                         0.0, 1.0);
  ++next.observations;
  return next;
}

std::vector<int> propose_pld(Rng& rng, int fixed_pld_len,
                             std::span<const double> match_probs) {
  std::vector<int> proposed;
  proposed.reserve(match_probs.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double p : match_probs) {
    proposed.push_back(unit(rng) < p ? fixed_pld_len : 0);
  }
  return proposed;
}

std::vector<int> propose_pld(Rng& rng, const SpecProfile& profile,
                             const BatchPlan& batch) {
  std::vector<double> probs;
  probs.reserve(batch.size());
  for (const auto& e : batch.entries) {
    probs.push_back(e.spec_eligible ? profile.match_prob.value_or(0.0) : 0.0);
  }
  return propose_pld(rng, profile.fixed_pld_len, probs);
}

}  // namespace specsim
