/*
 * Copyright (c) 2026, The colibri-sim authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "colibrisim/core_types.hpp"

namespace colibrisim {

/// Coarse externally visible core phase.
enum class CorePhase : std::uint8_t {
  Running,           // processing locally (between events)
  AwaitingResponse,  // a request with an immediate response is in flight
  Sleeping,          // waiting on a withheld LRwait/Mwait response
  BackingOff,        // local timer armed, no traffic
  Done,
};

inline const char* to_string(CorePhase p) {
  switch (p) {
    case CorePhase::Running: return "Running";
    case CorePhase::AwaitingResponse: return "AwaitingResponse";
    case CorePhase::Sleeping: return "Sleeping";
    case CorePhase::BackingOff: return "BackingOff";
    case CorePhase::Done: return "Done";
  }
  return "?";
}

/// Mutable per-core interpreter state. The program itself (CoreProgram) is
/// immutable and lives in the RunSetup; everything here is part of the
/// copyable simulation state.
struct CoreRt {
  CorePhase phase = CorePhase::Running;
  std::uint16_t step = 0;      // program-kind-specific resume point
  std::uint32_t iter = 0;      // completed loop iterations
  std::uint32_t op_index = 0;  // DirectOps cursor / QueueOps sub-op counter
  Word cur_addr = 0;           // target of the op in flight
  Word reg = 0;                // last loaded/response value
  Word aux = 0;                // scratch (ticket, predecessor, slot index...)
  std::uint32_t retries_this_op = 0;
  bool started = false;
  bool done = false;
  bool gave_up = false;  // hit retry_limit; program ends without completing

  // Counters (excluded from the verifier's canonical state where marked).
  std::uint64_t ops = 0;
  std::uint64_t retries = 0;      // failed SC/SCwait + queue-full rejections
  std::uint64_t msgs_sent = 0;    // stats only
  std::uint64_t empty_pops = 0;   // stats only
  Cycle completion = 0;           // stats only

  // Committed (addr, value) pairs; recorded only when log_commits is set
  // (exploration outcomes).
  std::vector<std::pair<Word, Word>> commit_log;
  // Values popped from the benchmark queue (oracle checks).
  std::vector<Word> popped;
};

}  // namespace colibrisim
