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

#include "specsim/metrics.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "specsim/error.h"

namespace specsim {
namespace {

std::vector<double> finished_latencies_s(const MetricsLog& log) {
  std::vector<double> out;
  out.reserve(log.requests.size());
  for (const auto& r : log.requests) out.push_back(r.latency_ms / 1000.0);
  std::sort(out.begin(), out.end());
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  q = std::clamp(q, 0.0, 1.0);
  double h = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<size_t>(std::floor(h));
  size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

void check_written(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::vector<std::pair<double, double>> latency_cdf(
    const MetricsLog& log, const std::vector<double>& quantiles) {
  if (log.requests.empty()) {
    throw Error(ErrorCode::kNoFinishedRequests, "latency CDF of an empty run");
  }
  auto sorted = finished_latencies_s(log);
  std::vector<std::pair<double, double>> out;
  out.reserve(quantiles.size());
  for (double q : quantiles) out.emplace_back(q, quantile_sorted(sorted, q));
  return out;
}

std::vector<std::pair<int64_t, double>> goodput_timeline(const MetricsLog& log,
                                                         int64_t window) {
  std::vector<std::pair<int64_t, double>> out;
  const auto n = static_cast<int64_t>(log.steps.size());
  if (n == 0) return out;
  window = std::clamp<int64_t>(window, 1, n);
  double tokens = 0;
  double latency = 0;
  for (int64_t i = 0; i < n; ++i) {
    tokens += static_cast<double>(log.steps[i].generated_tokens);
    latency += log.steps[i].latency_ms;
    if (i >= window) {
      tokens -= static_cast<double>(log.steps[i - window].generated_tokens);
      latency -= log.steps[i - window].latency_ms;
    }
    if (i >= window - 1) {
      out.emplace_back(log.steps[i].step_index,
                       latency > 0 ? 1000.0 * tokens / latency : 0.0);
    }
  }
  return out;
}

double mean_request_latency_ms(const MetricsLog& log) {
  if (log.requests.empty()) {
    throw Error(ErrorCode::kNoFinishedRequests, "no finished requests");
  }
  double total = 0;
  for (const auto& r : log.requests) total += r.latency_ms;
  return total / static_cast<double>(log.requests.size());
}

double compute_speedup(const MetricsLog& baseline, const MetricsLog& spec) {
  return mean_request_latency_ms(baseline) / mean_request_latency_ms(spec);
}

RunSummary summarize(const MetricsLog& log) {
  RunSummary s;
  s.finished = static_cast<int64_t>(log.requests.size());
  if (!log.requests.empty()) {
    s.mean_latency_s = mean_request_latency_ms(log) / 1000.0;
    auto cdf = latency_cdf(log, {0.5, 0.9, 0.99});
    s.p50_s = cdf[0].second;
    s.p90_s = cdf[1].second;
    s.p99_s = cdf[2].second;
  }
  double busy_ms = 0;
  int64_t k0 = 0;
  double k_sum = 0;
  for (const auto& st : log.steps) {
    busy_ms += st.latency_ms;
    s.generated_tokens += st.generated_tokens;
    if (st.phase != Phase::kDecode) continue;
    ++s.decode_steps;
    k_sum += st.chosen_k;
    if (st.chosen_k == 0) ++k0;
  }
  if (busy_ms > 0) {
    s.aggregate_goodput = 1000.0 * static_cast<double>(s.generated_tokens) / busy_ms;
  }
  if (s.decode_steps > 0) {
    s.k0_fraction = static_cast<double>(k0) / static_cast<double>(s.decode_steps);
    s.mean_k = k_sum / static_cast<double>(s.decode_steps);
  }
  return s;
}

void export_csv(const MetricsLog& log, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError,
                "cannot create " + out_dir.string() + ": " + ec.message());
  }

  const auto steps_path = out_dir / "steps.csv";
  auto steps = open_for_write(steps_path);
  steps << "step_index,clock_ms,batch_size,chosen_k,proposed,accepted,"
           "generated,latency_ms,goodput,acceptance_est\n";
  for (const auto& s : log.steps) {
    steps << s.step_index << ',' << format_double(s.clock_ms) << ','
          << s.batch_size << ',' << s.chosen_k << ',' << s.proposed_tokens
          << ',' << s.accepted_tokens << ',' << s.generated_tokens << ','
          << format_double(s.latency_ms) << ','
          << format_double(s.realized_goodput) << ','
          << format_double(s.acceptance_estimate) << '\n';
  }
  check_written(steps, steps_path);

  const auto req_path = out_dir / "requests.csv";
  auto reqs = open_for_write(req_path);
  reqs << "id,arrival_ms,finish_ms,latency_ms,prompt_len,output_len\n";
  for (const auto& r : log.requests) {
    reqs << r.id << ',' << format_double(r.arrival_ms) << ','
         << format_double(r.finish_ms) << ',' << format_double(r.latency_ms)
         << ',' << r.prompt_len << ',' << r.output_len << '\n';
  }
  check_written(reqs, req_path);

  const auto meta_path = out_dir / "meta.csv";
  auto meta = open_for_write(meta_path);
  meta << "key,value\n";
  for (const auto& [k, v] : log.meta) meta << k << ',' << v << '\n';
  check_written(meta, meta_path);
}

}  // namespace specsim
