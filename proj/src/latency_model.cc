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

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csv.h"
#include "json.hpp"
#include "specsim/error.h"

namespace specsim {
namespace {

constexpr int kNumCoeffs = 3;

Eigen::MatrixXd design_matrix(std::span<const ProfileSample> samples) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), kNumCoeffs);
  for (size_t i = 0; i < samples.size(); ++i) {
    auto row = static_cast<Eigen::Index>(i);
    x(row, 0) = samples[i].context_tokens;
    x(row, 1) = samples[i].batched_tokens;
    x(row, 2) = 1.0;
  }
  return x;
}

// Least squares restricted to the columns flagged in `free`.
std::array<double, kNumCoeffs> solve_subset(const Eigen::MatrixXd& x,
                                            const Eigen::VectorXd& y,
                                            const std::array<bool, 3>& free) {
  std::array<double, kNumCoeffs> coeffs{0, 0, 0};
  std::vector<int> cols;
  for (int c = 0; c < kNumCoeffs; ++c) {
    if (free[c]) cols.push_back(c);
  }
  if (cols.empty()) return coeffs;
  Eigen::MatrixXd sub(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) {
    sub.col(static_cast<Eigen::Index>(j)) = x.col(cols[j]);
  }
  Eigen::VectorXd beta = sub.colPivHouseholderQr().solve(y);
  for (size_t j = 0; j < cols.size(); ++j) {
    coeffs[cols[j]] = beta(static_cast<Eigen::Index>(j));
  }
  return coeffs;
}

}  // namespace

FitResult fit_latency_model(std::span<const ProfileSample> samples,
                            std::string profile_id) {
  if (samples.size() < 3) {
    throw Error(ErrorCode::kTooFewSamples,
                "need at least 3 profiling samples, got " +
                    std::to_string(samples.size()));
  }
  const Eigen::MatrixXd x = design_matrix(samples);
  Eigen::VectorXd y(x.rows());
  for (size_t i = 0; i < samples.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = samples[i].latency_ms;
  }

  // Column scaling keeps the rank test meaningful when token counts are in
  // the thousands and the intercept column is all ones.
  Eigen::MatrixXd scaled = x;
  for (int c = 0; c < kNumCoeffs; ++c) {
    double norm = scaled.col(c).norm();
    if (norm > 0) scaled.col(c) /= norm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < kNumCoeffs) {
    throw Error(ErrorCode::kDegenerateDesign,
                "context, batched and constant regressors are collinear");
  }

  std::array<bool, 3> free{true, true, true};
  std::array<double, kNumCoeffs> coeffs = solve_subset(x, y, free);
  while (true) {
    int worst = -1;
    for (int c = 0; c < kNumCoeffs; ++c) {
      if (free[c] && coeffs[c] < 0 &&
          (worst < 0 || coeffs[c] < coeffs[worst])) {
        worst = c;
      }
    }
    if (worst < 0) break;
    free[worst] = false;
    coeffs = solve_subset(x, y, free);
  }

  FitResult fit;
  fit.model = {coeffs[0], coeffs[1], coeffs[2], std::move(profile_id)};
  double mean = y.mean();
  double ss_tot = 0;
  double ss_res = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double pred = predict_forward_time(fit.model, x(i, 0), x(i, 1));
    ss_res += (y(i) - pred) * (y(i) - pred);
    ss_tot += (y(i) - mean) * (y(i) - mean);
  }
  if (ss_tot <= 0) {
    fit.r_squared = ss_res <= 1e-18 ? 1.0 : 0.0;
  } else {
    fit.r_squared = 1.0 - ss_res / ss_tot;
  }
  return fit;
}

double predict_forward_time(const LatencyModel& model, double context_tokens,
                            double batched_tokens) {
  return model.ctx_coeff * context_tokens + model.tok_coeff * batched_tokens +
         model.fixed_cost;
}

double predict_draft_latency(const Proposer& proposer, const BatchPlan& plan,
                             int proposed_len) {
  if (proposed_len <= 0) return 0.0;
  if (proposer.method == SpecMethod::kPromptLookup) return proposer.lookup_ms;
  if (!proposer.draft) {
    throw Error(ErrorCode::kMissingDraftModel,
                "draft-model speculation requested without a draft profile");
  }
  int64_t drafting = 0;
  int64_t context = 0;
  int64_t first_pass_tokens = 0;
  for (const auto& e : plan.entries) {
    if (e.proposed <= 0) continue;
    ++drafting;
    context += e.context_len;
    first_pass_tokens += std::max<int64_t>(1, e.draft_lag);
  }
  if (drafting == 0) return 0.0;
  double total = 0;
  for (int pass = 0; pass < proposed_len; ++pass) {
    double batched = pass == 0 ? static_cast<double>(first_pass_tokens)
                               : static_cast<double>(drafting);
    total += predict_forward_time(
        *proposer.draft, static_cast<double>(context + pass * drafting),
        batched);
  }
  return total;
}

double predict_batch_latency(const LatencyModel& target,
                             const Proposer& proposer, const BatchPlan& plan,
                             int proposed_len) {
  double draft = predict_draft_latency(proposer, plan, proposed_len);
  double verify = predict_forward_time(
      target, static_cast<double>(plan.context_total()),
      static_cast<double>(plan.batched_total()));
  return draft + verify;
}

std::vector<ProfileSample> load_profile_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  }
  const std::string source = path.string();
  std::vector<ProfileSample> samples;
  std::string line;
  size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() != 3 || fields[0] != "context_tokens" ||
          fields[1] != "batched_tokens" || fields[2] != "latency_ms") {
        throw Error(ErrorCode::kParseError,
                    csv::where(source, line_no) +
                        ": expected header context_tokens,batched_tokens,"
                        "latency_ms");
      }
      continue;
    }
    if (fields.size() != 3) {
      throw Error(ErrorCode::kParseError,
                  csv::where(source, line_no) + ": expected 3 fields");
    }
    ProfileSample s{csv::parse_double(fields[0], source, line_no),
                    csv::parse_double(fields[1], source, line_no),
                    csv::parse_double(fields[2], source, line_no)};
    if (s.context_tokens < 0 || s.batched_tokens < 1 || s.latency_ms <= 0) {
      throw Error(ErrorCode::kValueOutOfRange,
                  csv::where(source, line_no) +
                      ": need context_tokens >= 0, batched_tokens >= 1, "
                      "latency_ms > 0");
    }
    samples.push_back(s);
  }
  return samples;
}

std::string fit_to_json(const FitResult& fit) {
  nlohmann::ordered_json j;
  j["profile_id"] = fit.model.profile_id;
  j["ctx_coeff"] = fit.model.ctx_coeff;
  j["tok_coeff"] = fit.model.tok_coeff;
  j["fixed_cost"] = fit.model.fixed_cost;
  j["r_squared"] = fit.r_squared;
  return j.dump(2) + "\n";
}

FitResult fit_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  FitResult fit;
  try {
    fit.model.profile_id = j.value("profile_id", std::string{});
    fit.model.ctx_coeff = j.at("ctx_coeff").get<double>();
    fit.model.tok_coeff = j.at("tok_coeff").get<double>();
    fit.model.fixed_cost = j.at("fixed_cost").get<double>();
    fit.r_squared = j.value("r_squared", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("latency model: ") + e.what());
  }
  if (fit.model.ctx_coeff < 0 || fit.model.tok_coeff < 0 ||
      fit.model.fixed_cost < 0) {
    throw Error(ErrorCode::kValueOutOfRange,
                "latency model coefficients must be non-negative");
  }
  return fit;
}

FitResult load_latency_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return fit_from_json(buf.str());
}

void save_latency_model(const FitResult& fit,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << fit_to_json(fit);
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

double LatencyProfiles::lookup_cost_ms() const {
  if (pld_lookup_ms) return *pld_lookup_ms;
  return 0.05 * predict_forward_time(target_decode, 0, 1);
}

Proposer LatencyProfiles::proposer(SpecMethod method) const {
  return Proposer{method, draft_decode, lookup_cost_ms()};
}

LatencyProfiles desk_profiles() {
  LatencyProfiles p;
  p.target_decode = {5e-5, 0.15, 6.0, "desk-target/decode"};
  p.target_prefill = {5e-5, 0.03, 6.0, "desk-target/prefill"};
  p.draft_decode = LatencyModel{1e-5, 0.01, 0.8, "desk-draft/decode"};
  p.draft_prefill = LatencyModel{1e-5, 0.002, 0.8, "desk-draft/prefill"};
  return p;
}

}  // namespace specsim
