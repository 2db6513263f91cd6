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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "specsim/config.h"
#include "specsim/controller.h"
#include "specsim/engine.h"
#include "specsim/error.h"
#include "specsim/latency_model.h"
#include "specsim/metrics.h"
#include "specsim/speculation.h"
#include "specsim/workload.h"

namespace py = pybind11;
using namespace pybind11::literals;

namespace specsim {
namespace {

BatchPlan uniform_decode_plan(int batch, int64_t context) {
  BatchPlan p;
  p.phase = Phase::kDecode;
  for (int i = 0; i < batch; ++i) {
    p.entries.push_back({i, context, context, 1, true, 0, 0});
  }
  return p;
}

// Controller choice for `batch` identical requests; a convenience for
// exploring the goodput surface from Python.
SpecDecision decide(int batch, int64_t context, double rate, int max_len,
                    const LatencyProfiles& profiles, const std::string& policy) {
  ControllerConfig cc;
  cc.max_len = max_len;
  cc.policy = spec_method_from_string(policy);
  ControllerState st = ControllerState::initial(cc);
  st.acceptance.rate = rate;
  KvBudget kv{int64_t{1} << 40, 0, 0};
  return argmax_goodput(st, cc, profiles.target_decode,
                        profiles.proposer(cc.policy),
                        uniform_decode_plan(batch, context), kv);
}

py::dict summary_dict(const MetricsLog& log) {
  RunSummary s = summarize(log);
  return py::dict("finished"_a = s.finished, "mean_latency_s"_a = s.mean_latency_s,
                  "p50_s"_a = s.p50_s, "p90_s"_a = s.p90_s, "p99_s"_a = s.p99_s,
                  "goodput"_a = s.aggregate_goodput, "k0_fraction"_a = s.k0_fraction,
                  "mean_k"_a = s.mean_k, "decode_steps"_a = s.decode_steps,
                  "generated_tokens"_a = s.generated_tokens,
                  "draft_prefill_runs"_a = log.draft_prefill_runs,
                  "draft_prefill_skips"_a = log.draft_prefill_skips,
                  "unfinished"_a = log.unfinished_requests);
}

}  // namespace
}  // namespace specsim

PYBIND11_MODULE(_core, m) {
  using namespace specsim;
  m.doc() = "Discrete-event simulator of batched LLM serving with speculation";

  static py::exception<Error> error(m, "SpecsimError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<LatencyModel>(m, "LatencyModel")
      .def(py::init([](double ctx, double tok, double fixed, std::string id) {
             return LatencyModel{ctx, tok, fixed, std::move(id)};
           }),
           "ctx_coeff"_a, "tok_coeff"_a, "fixed_cost"_a, "profile_id"_a = "")
      .def_readwrite("ctx_coeff", &LatencyModel::ctx_coeff)
      .def_readwrite("tok_coeff", &LatencyModel::tok_coeff)
      .def_readwrite("fixed_cost", &LatencyModel::fixed_cost)
      .def_readwrite("profile_id", &LatencyModel::profile_id)
      .def("__call__", &predict_forward_time, "context_tokens"_a, "batched_tokens"_a)
      .def("__repr__", [](const LatencyModel& lm) {
        return "LatencyModel(ctx=" + format_double(lm.ctx_coeff) +
               ", tok=" + format_double(lm.tok_coeff) +
               ", fixed=" + format_double(lm.fixed_cost) + ")";
      });

  py::class_<LatencyProfiles>(m, "LatencyProfiles")
      .def_readwrite("target_decode", &LatencyProfiles::target_decode)
      .def_readwrite("target_prefill", &LatencyProfiles::target_prefill)
      .def_readwrite("draft_decode", &LatencyProfiles::draft_decode)
      .def_readwrite("draft_prefill", &LatencyProfiles::draft_prefill)
      .def_readwrite("pld_lookup_ms", &LatencyProfiles::pld_lookup_ms);
  m.def("desk_profiles", &desk_profiles);

  m.def("predict_forward_time", &predict_forward_time, "model"_a,
        "context_tokens"_a, "batched_tokens"_a);
  m.def(
      "fit_latency_model",
      [](const std::vector<std::tuple<double, double, double>>& rows,
         std::string profile_id) {
        std::vector<ProfileSample> samples;
        samples.reserve(rows.size());
        for (auto [c, b, l] : rows) samples.push_back({c, b, l});
        FitResult fit = fit_latency_model(samples, std::move(profile_id));
        return py::make_tuple(fit.model, fit.r_squared);
      },
      "samples"_a, "profile_id"_a = "",
      "Fit (context_tokens, batched_tokens, latency_ms) rows; returns "
      "(LatencyModel, r_squared).");

  m.def("expected_generated_length", &expected_generated_length, "rate"_a, "k"_a);
  m.def(
      "expected_per_token_latency",
      [](const std::vector<double>& lat, double rate, int k) {
        return expected_per_token_latency(lat, rate, k);
      },
      "outcome_latencies"_a, "rate"_a, "k"_a);
  m.def(
      "sample_accepted_counts",
      [](uint64_t seed, double rate, int k, int n) {
        Rng rng(seed);
        std::vector<int> out(static_cast<size_t>(n));
        for (auto& v : out) v = sample_accepted_count(rng, rate, k);
        return out;
      },
      "seed"_a, "rate"_a, "k"_a, "n"_a);

  m.def(
      "choose_k",
      [](int batch, double rate, int64_t context, int max_len,
         std::optional<LatencyProfiles> profiles, const std::string& policy) {
        SpecDecision d = decide(batch, context, rate, max_len,
                                profiles ? *profiles : desk_profiles(), policy);
        return py::dict("proposed_len"_a = d.proposed_len,
                        "verification_len"_a = d.verification_len,
                        "goodput"_a = d.predicted_goodput,
                        "latency_ms"_a = d.predicted_latency);
      },
      "batch"_a, "rate"_a, "context"_a = 256, "max_len"_a = 8,
      "profiles"_a = py::none(), "policy"_a = "draft",
      "Goodput-maximizing proposal length for a batch of identical requests.");

  m.def(
      "run",
      [](const std::filesystem::path& config, std::optional<std::string> mode,
         std::optional<uint64_t> seed, std::optional<std::filesystem::path> out) {
        RunConfig rc = load_run_config(config);
        if (mode) rc.engine.mode = SpecMode::parse(*mode);
        if (seed) rc.seed = *seed;
        MetricsLog log;
        {
          py::gil_scoped_release release;
          log = run_simulation(rc.scenario, rc.engine, rc.seed);
          if (out) export_csv(log, *out);
        }
        return summary_dict(log);
      },
      "config"_a, "mode"_a = py::none(), "seed"_a = py::none(),
      "out"_a = py::none(),
      "Run a scenario file; returns summary statistics and optionally "
      "exports steps/requests/meta CSVs.");
  m.def(
      "dump_config",
      [](const std::filesystem::path& config) {
        return dump_run_config(load_run_config(config));
      },
      "config"_a);
}
