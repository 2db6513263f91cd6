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

#include "specsim/workload.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "csv.h"
#include "specsim/error.h"

namespace specsim {
namespace {

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct Moments {
  double mean = 0;
  double stddev = 0;
  double mass = 0;
};

// Mean and stddev of N(mu, sigma^2) restricted to [lo, hi].
Moments truncated_moments(double mu, double sigma, double lo, double hi) {
  double a = (lo - mu) / sigma;
  double b = (hi - mu) / sigma;
  double z = normal_cdf(b) - normal_cdf(a);
  Moments m;
  m.mass = z;
  if (z < 1e-12) return m;
  double pa = normal_pdf(a);
  double pb = normal_pdf(b);
  double shift = (pa - pb) / z;
  m.mean = mu + sigma * shift;
  double var = sigma * sigma * (1.0 + (a * pa - b * pb) / z - shift * shift);
  m.stddev = std::sqrt(std::max(var, 0.0));
  return m;
}

}  // namespace

std::string_view to_string(LengthKind kind) {
  switch (kind) {
    case LengthKind::kFixed: return "fixed";
    case LengthKind::kTruncatedNormal: return "truncated_normal";
    case LengthKind::kLogNormal: return "lognormal";
  }
  return "fixed";
}

LengthKind length_kind_from_string(std::string_view name) {
  if (name == "fixed") return LengthKind::kFixed;
  if (name == "truncated_normal" || name == "normal") {
    return LengthKind::kTruncatedNormal;
  }
  if (name == "lognormal") return LengthKind::kLogNormal;
  throw Error(ErrorCode::kInvalidConfig,
              "unknown length distribution '" + std::string(name) + "'");
}

void LengthDist::validate(const std::string& what) const {
  if (!(mean >= 1)) {
    throw Error(ErrorCode::kInvalidConfig, what + ": mean must be >= 1");
  }
  if (!(stddev >= 0)) {
    throw Error(ErrorCode::kInvalidConfig, what + ": stddev must be >= 0");
  }
  if (min < 1 || (max != 0 && max < min)) {
    throw Error(ErrorCode::kInvalidConfig, what + ": need 1 <= min <= max");
  }
}

LengthSampler::LengthSampler(const LengthDist& dist) : dist_(dist) {
  lo_ = static_cast<double>(std::max<int64_t>(1, dist.min));
  if (dist.max > 0) {
    hi_ = static_cast<double>(dist.max);
  } else if (dist.kind == LengthKind::kTruncatedNormal) {
    hi_ = std::max(lo_, std::floor(dist.mean + 4.0 * dist.stddev));
  } else {
    hi_ = std::numeric_limits<double>::infinity();
  }
  switch (dist.kind) {
    case LengthKind::kFixed:
      break;
    case LengthKind::kLogNormal: {
      double cv = dist.stddev / dist.mean;
      double s2 = std::log1p(cv * cv);
      sigma_ = std::sqrt(s2);
      mu_ = std::log(dist.mean) - 0.5 * s2;
      break;
    }
    case LengthKind::kTruncatedNormal: {
      mu_ = dist.mean;
      sigma_ = dist.stddev;
      if (sigma_ <= 0) break;
      // Fixed-point moment matching; keep the last iterate that still has
      // reasonable mass inside the bounds.
      double best_mu = mu_;
      double best_sigma = sigma_;
      for (int iter = 0; iter < 200; ++iter) {
        Moments m = truncated_moments(mu_, sigma_, lo_ - 0.5, hi_ + 0.5);
        if (m.mass < 0.05 || m.stddev <= 0) break;
        best_mu = mu_;
        best_sigma = sigma_;
        double dm = dist.mean - m.mean;
        double ratio = dist.stddev / m.stddev;
        if (std::abs(dm) < 1e-9 * dist.mean && std::abs(ratio - 1) < 1e-9) {
          break;
        }
        mu_ += dm;
        sigma_ *= ratio;
      }
      mu_ = best_mu;
      sigma_ = best_sigma;
      break;
    }
  }
}

int64_t LengthSampler::operator()(Rng& rng) const {
  switch (dist_.kind) {
    case LengthKind::kFixed:
      return static_cast<int64_t>(
          std::clamp(std::round(dist_.mean), lo_, std::max(lo_, hi_)));
    case LengthKind::kLogNormal: {
      if (sigma_ <= 0) {
        return static_cast<int64_t>(std::clamp(std::round(dist_.mean), lo_, hi_));
      }
      std::lognormal_distribution<double> d(mu_, sigma_);
      return static_cast<int64_t>(std::clamp(std::round(d(rng)), lo_, hi_));
    }
    case LengthKind::kTruncatedNormal: {
      if (sigma_ <= 0) {
        return static_cast<int64_t>(std::clamp(std::round(mu_), lo_, hi_));
      }
      std::normal_distribution<double> d(mu_, sigma_);
      for (int attempt = 0; attempt < 10000; ++attempt) {
        double x = std::round(d(rng));
        if (x >= lo_ && x <= hi_) return static_cast<int64_t>(x);
      }
      return static_cast<int64_t>(std::clamp(std::round(mu_), lo_, hi_));
    }
  }
  return static_cast<int64_t>(lo_);
}

void DatasetProfile::validate() const {
  prompt_len.validate(name + ".prompt_len");
  output_len.validate(name + ".output_len");
  if (!(true_acceptance >= 0 && true_acceptance <= 1)) {
    throw Error(ErrorCode::kInvalidConfig,
                name + ": acceptance must be in [0,1]");
  }
  if (pld_match_prob && !(*pld_match_prob >= 0 && *pld_match_prob <= 1)) {
    throw Error(ErrorCode::kInvalidConfig,
                name + ": pld_match_prob must be in [0,1]");
  }
}

std::vector<DatasetProfile> builtin_datasets() {
  // Input/output moments and acceptance rates from published dataset
  // statistics; ShareGPT's coefficient of variation is above what a
  // truncated normal can reach, so it uses a lognormal.
  return {
      {"sharegpt", LengthDist::lognormal(227, 264),
       LengthDist::lognormal(256, 249), 0.62, 0.4},
      {"sonnet", LengthDist::truncated_normal(517, 10),
       LengthDist::truncated_normal(141, 22), 0.53, 0.6},
      {"cnn_dailymail", LengthDist::truncated_normal(1067, 537),
       LengthDist::truncated_normal(108, 41), 0.54, 0.7},
  };
}

DatasetProfile builtin_dataset(std::string_view name) {
  for (auto& d : builtin_datasets()) {
    if (d.name == name) return d;
  }
  throw Error(ErrorCode::kInvalidConfig,
              "unknown dataset '" + std::string(name) + "'");
}

double Scenario::total_duration_s() const {
  double total = 0;
  for (const auto& p : phases) total += p.duration_s;
  return total;
}

void Scenario::validate() const {
  if (trace) return;
  for (size_t i = 0; i < phases.size(); ++i) {
    const auto& p = phases[i];
    std::string where = "phase " + std::to_string(i);
    if (!(p.duration_s > 0)) {
      throw Error(ErrorCode::kInvalidConfig, where + ": duration must be > 0");
    }
    if (!(p.qps >= 0)) {
      throw Error(ErrorCode::kInvalidConfig, where + ": qps must be >= 0");
    }
    p.dataset.validate();
  }
  if (horizon_s > 0 && horizon_s < total_duration_s()) {
    throw Error(ErrorCode::kInvalidConfig,
                "horizon_s must cover the sum of phase durations");
  }
}

std::vector<Request> generate_arrivals(const Scenario& scenario, Rng& rng) {
  std::vector<Request> out;
  double phase_start = 0;
  for (size_t i = 0; i < scenario.phases.size(); ++i) {
    const auto& phase = scenario.phases[i];
    const double phase_end = phase_start + phase.duration_s;
    if (phase.qps > 0) {
      LengthSampler prompt(phase.dataset.prompt_len);
      LengthSampler output(phase.dataset.output_len);
      std::exponential_distribution<double> gap(phase.qps);
      double t = phase_start;
      while (true) {
        t += gap(rng);
        if (t >= phase_end) break;
        Request r;
        r.id = static_cast<RequestId>(out.size());
        r.arrival_ms = t * 1000.0;
        r.prompt_len = prompt(rng);
        r.target_output_len = output(rng);
        r.true_rate = phase.dataset.true_acceptance;
        r.match_prob = phase.dataset.pld_match_prob.value_or(0.0);
        r.phase_index = static_cast<int>(i);
        out.push_back(r);
      }
    }
    phase_start = phase_end;
  }
  return out;
}

std::vector<Request> load_trace(const std::filesystem::path& path,
                                double match_prob) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  const std::string source = path.string();
  std::vector<Request> out;
  std::string line;
  size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    auto f = csv::split(line);
    if (!header_seen) {
      header_seen = true;
      if (f.size() != 4 || f[0] != "arrival_ms" || f[1] != "prompt_len" ||
          f[2] != "output_len" || f[3] != "acceptance") {
        throw Error(ErrorCode::kParseError,
                    csv::where(source, line_no) +
                        ": expected header arrival_ms,prompt_len,output_len,"
                        "acceptance");
      }
      continue;
    }
    if (f.size() != 4) {
      throw Error(ErrorCode::kParseError, csv::where(source, line_no) +
                                              ": expected 4 fields, got " +
                                              std::to_string(f.size()));
    }
    Request r;
    r.arrival_ms = csv::parse_double(f[0], source, line_no);
    r.prompt_len = csv::parse_int(f[1], source, line_no);
    r.target_output_len = csv::parse_int(f[2], source, line_no);
    r.true_rate = csv::parse_double(f[3], source, line_no);
    r.match_prob = match_prob;
    auto range_error = [&](const std::string& msg) {
      return Error(ErrorCode::kValueOutOfRange,
                   csv::where(source, line_no) + ": " + msg);
    };
    if (!(r.arrival_ms >= 0)) throw range_error("arrival_ms must be >= 0");
    if (r.prompt_len < 1) throw range_error("prompt_len must be >= 1");
    if (r.target_output_len < 1) throw range_error("output_len must be >= 1");
    if (!(r.true_rate >= 0 && r.true_rate <= 1)) {
      throw range_error("acceptance must be in [0,1]");
    }
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Request& a, const Request& b) {
                     return a.arrival_ms < b.arrival_ms;
                   });
  for (size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<RequestId>(i);
  return out;
}

}  // namespace specsim
