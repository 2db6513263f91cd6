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
"""Python bindings for the specsim serving simulator."""

from specsim._core import (
    LatencyModel,
    LatencyProfiles,
    SpecsimError,
    choose_k,
    desk_profiles,
    dump_config,
    expected_generated_length,
    expected_per_token_latency,
    fit_latency_model,
    predict_forward_time,
    run,
    sample_accepted_counts,
)

__all__ = [
    "LatencyModel",
    "LatencyProfiles",
    "SpecsimError",
    "choose_k",
    "desk_profiles",
    "dump_config",
    "expected_generated_length",
    "expected_per_token_latency",
    "fit_latency_model",
    "predict_forward_time",
    "run",
    "sample_accepted_counts",
]
