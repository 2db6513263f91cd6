# Copyright 2026 The specsim Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import csv
import pathlib

import pytest

import specsim

ROOT = pathlib.Path(__file__).resolve().parents[2]


def test_case_study_latency():
    assert specsim.expected_per_token_latency([12.6, 6.3, 4.2], 0.7, 2) == pytest.approx(7.161, abs=1e-9)


def test_generated_length_matches_power_sum():
    for rate in (0.0, 0.3, 0.7, 1.0):
        for k in range(6):
            assert specsim.expected_generated_length(rate, k) == pytest.approx(sum(rate**j for j in range(k + 1)))


def test_fit_recovers_planted_model():
    rows = [(c, b, 0.001 * c + 0.05 * b + 2.0) for c in range(0, 2500, 500) for b in range(1, 321, 64)]
    model, r2 = specsim.fit_latency_model(rows, "planted")
    assert model.ctx_coeff == pytest.approx(0.001, abs=1e-9)
    assert model.tok_coeff == pytest.approx(0.05, abs=1e-9)
    assert model.fixed_cost == pytest.approx(2.0, abs=1e-9)
    assert r2 == pytest.approx(1.0)
    assert model(1000, 100) == pytest.approx(8.0)


def test_too_few_samples_raises():
    with pytest.raises(specsim.SpecsimError, match="TooFewSamples"):
        specsim.fit_latency_model([(0, 1, 1.0), (1, 2, 2.0)])


def test_sampled_acceptance_mean():
    counts = specsim.sample_accepted_counts(7, 0.7, 4, 200_000)
    assert max(counts) <= 4 and min(counts) >= 0
    assert sum(c + 1 for c in counts) / len(counts) == pytest.approx(2.7731, rel=0.01)


def test_choose_k_shrinks_with_batch():
    ks = [specsim.choose_k(b, 0.9)["proposed_len"] for b in (1, 4, 16, 64)]
    assert ks == sorted(ks, reverse=True) and ks[0] > ks[-1]


def test_run_exports_csvs(tmp_path):
    scenario = ROOT / "scenarios" / "static_sonnet.json"
    a = specsim.run(scenario, mode="turbospec", out=tmp_path / "a")
    b = specsim.run(scenario, mode="turbospec", out=tmp_path / "b")
    assert a == b and a["unfinished"] == 0
    for name in ("steps.csv", "requests.csv", "meta.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    with open(tmp_path / "a" / "requests.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == a["finished"]
    assert sum(int(r["output_len"]) for r in rows) == a["generated_tokens"]


def test_no_spec_never_speculates():
    summary = specsim.run(ROOT / "scenarios" / "static_sonnet.json", mode="no_spec")
    assert summary["k0_fraction"] == 1.0 and summary["draft_prefill_runs"] == 0
