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

#pragma once

#include <cstdint>

namespace specsim {

// Token-slot accounting for target and draft KV caches.
struct KvBudget {
  int64_t total_slots = 0;
  int64_t used_target = 0;
  int64_t used_draft = 0;

  int64_t free_slots() const { return total_slots - used_target - used_draft; }
  bool within_budget() const { return used_target + used_draft <= total_slots; }
};

}  // namespace specsim
