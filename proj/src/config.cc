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

#include "specsim/config.h"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "specsim/error.h"

namespace specsim {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string& msg) {
  throw Error(ErrorCode::kInvalidConfig, msg);
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) invalid(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) invalid(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(where + "." + key + ": wrong type");
  }
}

LengthDist parse_dist(const json& j, const std::string& where) {
  if (j.is_number()) return LengthDist::fixed(j.get<int64_t>());
  check_keys(j, where, {"dist", "mean", "stddev", "min", "max"});
  LengthDist d;
  d.kind = length_kind_from_string(get<std::string>(j, "dist", where, "fixed"));
  if (!j.contains("mean")) invalid(where + ": missing mean");
  d.mean = get<double>(j, "mean", where, 1);
  d.stddev = get<double>(j, "stddev", where, 0);
  d.min = get<int64_t>(j, "min", where, 1);
  d.max = get<int64_t>(j, "max", where, 0);
  d.validate(where);
  return d;
}

ordered_json dist_to_json(const LengthDist& d) {
  ordered_json j;
  j["dist"] = std::string(to_string(d.kind));
  j["mean"] = d.mean;
  j["stddev"] = d.stddev;
  j["min"] = d.min;
  j["max"] = d.max;
  return j;
}

DatasetProfile parse_dataset(const json& j, const std::string& name,
                             const std::map<std::string, DatasetProfile>& known) {
  const std::string where = "dataset " + name;
  check_keys(j, where,
             {"name", "base", "prompt_len", "output_len", "acceptance",
              "pld_match_prob"});
  DatasetProfile d;
  if (j.contains("base")) {
    auto base = get<std::string>(j, "base", where, "");
    auto it = known.find(base);
    d = it != known.end() ? it->second : builtin_dataset(base);
  } else if (!j.contains("prompt_len") || !j.contains("output_len")) {
    invalid(where + ": needs prompt_len and output_len (or a base)");
  }
  d.name = get<std::string>(j, "name", where, name);
  if (j.contains("prompt_len")) d.prompt_len = parse_dist(j["prompt_len"], where + ".prompt_len");
  if (j.contains("output_len")) d.output_len = parse_dist(j["output_len"], where + ".output_len");
  d.true_acceptance = get<double>(j, "acceptance", where, d.true_acceptance);
  if (j.contains("pld_match_prob")) {
    if (j["pld_match_prob"].is_null()) {
      d.pld_match_prob.reset();
    } else {
      d.pld_match_prob = get<double>(j, "pld_match_prob", where, 0);
    }
  }
  d.validate();
  return d;
}

ordered_json dataset_to_json(const DatasetProfile& d) {
  ordered_json j;
  j["name"] = d.name;
  j["prompt_len"] = dist_to_json(d.prompt_len);
  j["output_len"] = dist_to_json(d.output_len);
  j["acceptance"] = d.true_acceptance;
  j["pld_match_prob"] = d.pld_match_prob ? ordered_json(*d.pld_match_prob)
                                         : ordered_json(nullptr);
  return j;
}

LatencyModel parse_model(const json& j, const std::filesystem::path& base_dir,
                         const std::string& where) {
  if (j.is_string()) {
    std::filesystem::path p = j.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    return load_latency_model(p).model;
  }
  check_keys(j, where,
             {"profile_id", "ctx_coeff", "tok_coeff", "fixed_cost", "r_squared"});
  return fit_from_json(j.dump()).model;
}

ordered_json model_to_json(const LatencyModel& m) {
  ordered_json j;
  j["profile_id"] = m.profile_id;
  j["ctx_coeff"] = m.ctx_coeff;
  j["tok_coeff"] = m.tok_coeff;
  j["fixed_cost"] = m.fixed_cost;
  return j;
}

void parse_controller(const json& j, ControllerConfig& c) {
  const std::string where = "controller";
  check_keys(j, where,
             {"max_len", "fixed_pld_len", "policy", "reset_period", "ewma_decay",
              "prior_rate", "pld_match_prob", "prefill_disabling"});
  c.max_len = get<int>(j, "max_len", where, c.max_len);
  c.fixed_pld_len = get<int>(j, "fixed_pld_len", where, c.fixed_pld_len);
  if (j.contains("policy")) {
    c.policy = spec_method_from_string(get<std::string>(j, "policy", where, ""));
  }
  c.reset_period = get<int64_t>(j, "reset_period", where, c.reset_period);
  c.ewma_decay = get<double>(j, "ewma_decay", where, c.ewma_decay);
  c.prior_rate = get<double>(j, "prior_rate", where, c.prior_rate);
  c.pld_match_prob = get<double>(j, "pld_match_prob", where, c.pld_match_prob);
  c.prefill_disabling =
      get<bool>(j, "prefill_disabling", where, c.prefill_disabling);
}

void parse_engine(const json& j, EngineConfig& e) {
  const std::string where = "engine";
  check_keys(j, where, {"max_batch", "kv_slots", "latency_noise_sigma"});
  e.max_batch = get<int>(j, "max_batch", where, e.max_batch);
  e.kv_slots = get<int64_t>(j, "kv_slots", where, e.kv_slots);
  e.latency_noise_sigma =
      get<double>(j, "latency_noise_sigma", where, e.latency_noise_sigma);
}

void parse_profiles(const json& j, LatencyProfiles& p,
                    const std::filesystem::path& base_dir) {
  const std::string where = "profiles";
  check_keys(j, where,
             {"target_decode", "target_prefill", "draft_decode", "draft_prefill",
              "pld_lookup_ms"});
  bool prefill_given = j.contains("target_prefill");
  if (j.contains("target_decode")) {
    p.target_decode = parse_model(j["target_decode"], base_dir, where + ".target_decode");
    if (!prefill_given) p.target_prefill = p.target_decode;
  }
  if (prefill_given) {
    p.target_prefill = parse_model(j["target_prefill"], base_dir, where + ".target_prefill");
  }
  auto optional_model = [&](const char* key, std::optional<LatencyModel>& slot) {
    if (!j.contains(key)) return;
    if (j[key].is_null()) {
      slot.reset();
    } else {
      slot = parse_model(j[key], base_dir, where + "." + key);
    }
  };
  bool draft_prefill_given = j.contains("draft_prefill");
  optional_model("draft_decode", p.draft_decode);
  if (j.contains("draft_decode") && !draft_prefill_given) {
    p.draft_prefill = p.draft_decode;
  }
  optional_model("draft_prefill", p.draft_prefill);
  if (j.contains("pld_lookup_ms")) {
    if (j["pld_lookup_ms"].is_null()) {
      p.pld_lookup_ms.reset();
    } else {
      p.pld_lookup_ms = get<double>(j, "pld_lookup_ms", where, 0);
    }
  }
}

}  // namespace

RunConfig run_config_from_json(const std::string& text,
                               const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  check_keys(root, "config",
             {"name", "seed", "horizon_s", "datasets", "phases", "trace",
              "controller", "engine", "profiles", "mode", "scenario"});

  RunConfig rc;
  // A dumped run config nests the scenario; a scenario file is flat.
  const json& sc = root.contains("scenario") ? root["scenario"] : root;
  if (root.contains("scenario")) {
    check_keys(sc, "scenario",
               {"name", "seed", "horizon_s", "datasets", "phases", "trace"});
  }

  Scenario& s = rc.scenario;
  s.name = get<std::string>(sc, "name", "scenario", "scenario");
  s.seed = get<uint64_t>(sc, "seed", "scenario", 0);
  s.horizon_s = get<double>(sc, "horizon_s", "scenario", 0);
  rc.seed = get<uint64_t>(root, "seed", "config", s.seed);

  std::map<std::string, DatasetProfile> datasets;
  for (auto& d : builtin_datasets()) datasets[d.name] = d;
  if (sc.contains("datasets")) {
    if (!sc["datasets"].is_object()) invalid("datasets: expected an object");
    for (auto it = sc["datasets"].begin(); it != sc["datasets"].end(); ++it) {
      datasets[it.key()] = parse_dataset(it.value(), it.key(), datasets);
    }
  }
  if (sc.contains("phases")) {
    if (!sc["phases"].is_array()) invalid("phases: expected an array");
    size_t index = 0;
    for (const auto& pj : sc["phases"]) {
      const std::string where = "phases[" + std::to_string(index++) + "]";
      check_keys(pj, where, {"duration_s", "qps", "dataset", "acceptance"});
      ScenarioPhase phase;
      phase.duration_s = get<double>(pj, "duration_s", where, 0);
      phase.qps = get<double>(pj, "qps", where, 0);
      if (!pj.contains("dataset")) invalid(where + ": missing dataset");
      const json& dj = pj["dataset"];
      if (dj.is_string()) {
        auto it = datasets.find(dj.get<std::string>());
        if (it == datasets.end()) {
          invalid(where + ": unknown dataset '" + dj.get<std::string>() + "'");
        }
        phase.dataset = it->second;
      } else {
        phase.dataset = parse_dataset(dj, get<std::string>(dj, "name", where, "inline"),
                                      datasets);
      }
      if (pj.contains("acceptance")) {
        phase.dataset.true_acceptance = get<double>(pj, "acceptance", where, 0);
      }
      s.phases.push_back(std::move(phase));
    }
  }
  if (sc.contains("trace")) {
    std::filesystem::path p = get<std::string>(sc, "trace", "scenario", "");
    if (p.is_relative()) p = base_dir / p;
    s.trace = p;
  }

  if (root.contains("controller")) parse_controller(root["controller"], rc.engine.controller);
  if (root.contains("engine")) parse_engine(root["engine"], rc.engine);
  if (root.contains("profiles")) parse_profiles(root["profiles"], rc.engine.profiles, base_dir);
  if (root.contains("mode")) {
    rc.engine.mode = SpecMode::parse(get<std::string>(root, "mode", "config", ""));
  }
  s.validate();
  rc.engine.validate();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str(), path.parent_path());
}

std::string dump_run_config(const RunConfig& config) {
  ordered_json root;
  root["seed"] = config.seed;
  root["mode"] = config.engine.mode.name();

  const Scenario& s = config.scenario;
  ordered_json sc;
  sc["name"] = s.name;
  sc["seed"] = s.seed;
  sc["horizon_s"] = s.horizon_s;
  sc["phases"] = ordered_json::array();
  for (const auto& p : s.phases) {
    ordered_json pj;
    pj["duration_s"] = p.duration_s;
    pj["qps"] = p.qps;
    pj["dataset"] = dataset_to_json(p.dataset);
    sc["phases"].push_back(pj);
  }
  if (s.trace) sc["trace"] = std::filesystem::absolute(*s.trace).string();
  root["scenario"] = sc;

  const ControllerConfig& c = config.engine.controller;
  ordered_json cj;
  cj["max_len"] = c.max_len;
  cj["fixed_pld_len"] = c.fixed_pld_len;
  cj["policy"] = std::string(to_string(c.policy));
  cj["reset_period"] = c.reset_period;
  cj["ewma_decay"] = c.ewma_decay;
  cj["prior_rate"] = c.prior_rate;
  cj["pld_match_prob"] = c.pld_match_prob;
  cj["prefill_disabling"] = c.prefill_disabling;
  root["controller"] = cj;

  ordered_json ej;
  ej["max_batch"] = config.engine.max_batch;
  ej["kv_slots"] = config.engine.kv_slots;
  ej["latency_noise_sigma"] = config.engine.latency_noise_sigma;
  root["engine"] = ej;

  const LatencyProfiles& p = config.engine.profiles;
  ordered_json pj;
  pj["target_decode"] = model_to_json(p.target_decode);
  pj["target_prefill"] = model_to_json(p.target_prefill);
  pj["draft_decode"] = p.draft_decode ? model_to_json(*p.draft_decode) : ordered_json(nullptr);
  pj["draft_prefill"] = p.draft_prefill ? model_to_json(*p.draft_prefill) : ordered_json(nullptr);
  pj["pld_lookup_ms"] = p.pld_lookup_ms ? ordered_json(*p.pld_lookup_ms) : ordered_json(nullptr);
  root["profiles"] = pj;
  return root.dump(2) + "\n";
}

}  // namespace specsim
