// Copyright 2026 The slabsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <ostream>

namespace slabsim {

// Runs the bundled oracle suites (allocator replay ledger, batching vs the
// classical on-time rule, placement re-execution, and a deliberate
// corruption that must be caught). Prints one pass/fail line per suite.
// Returns the number of failed suites.
int run_selftest(std::ostream& out, std::uint64_t seed);

}  // namespace slabsim
