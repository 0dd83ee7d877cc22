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

#include <map>
#include <utility>
#include <vector>

#include "colibrisim/core_types.hpp"

namespace colibrisim {

// Distributed reservation queue state. Each memory controller owns a small,
// parameterizable number of queue slots (a head and a tail register per
// tracked address); each core owns one queue node holding a successor link.
// The queue itself is the chain head -> successor -> ... -> tail, stitched
// together by SuccessorUpdate and WakeUpRequest messages.

/// One controller-side queue slot.
///
/// `head_valid` is the commit guard: it is dropped when the head's SCwait
/// (or Mwait response) dequeues the head, and re-established only by the
/// matching WakeUpRequest promoting the successor. `reservation_valid` is
/// the head's data reservation/monitor; any committed write to `addr`
/// clears it.
struct ColibriSlot {
  bool occupied = false;
  Word addr = 0;
  CoreId head = kNoCore;
  CoreId tail = kNoCore;
  bool head_valid = false;
  bool reservation_valid = false;
  bool head_is_mwait = false;
  Word head_expected = 0;
  // Waiter kind of each enqueued-but-unserved core. The abstract protocol
  // model keeps this beside the slot; the storage cost model counts only the
  // head/tail identifiers.
  std::map<CoreId, std::pair<bool, Word>> pending_kind;  // core -> (is_mwait, expected)

  bool operator==(const ColibriSlot&) const = default;
};

enum class QPhase : std::uint8_t {
  Idle,     // no episode
  Waiting,  // LRwait/Mwait issued, response not yet seen (core may sleep)
  Holding,  // LRwait response received, SCwait not yet issued
  PastWait, // SCwait passed the node (or Mwait response consumed)
};

inline const char* to_string(QPhase p) {
  switch (p) {
    case QPhase::Idle: return "Idle";
    case QPhase::Waiting: return "Waiting";
    case QPhase::Holding: return "Holding";
    case QPhase::PastWait: return "PastWait";
  }
  return "?";
}

/// Per-core hardware queue node. The successor link is written remotely by a
/// SuccessorUpdate; it is consumed exactly once per episode when the node
/// dispatches the WakeUpRequest for its successor.
struct QNode {
  QPhase phase = QPhase::Idle;
  Word addr = 0;
  bool is_mwait = false;
  bool has_successor = false;
  CoreId successor = kNoCore;
  bool successor_seen = false;  // a SuccessorUpdate already arrived this episode

  bool operator==(const QNode&) const = default;

  void start_episode(Word a, bool mwait) {
    phase = QPhase::Waiting;
    addr = a;
    is_mwait = mwait;
    has_successor = false;
    successor = kNoCore;
    successor_seen = false;
  }

  void end_episode() {
    phase = QPhase::Idle;
    has_successor = false;
    successor = kNoCore;
    successor_seen = false;
  }
};

inline int find_slot(const std::vector<ColibriSlot>& slots, Word addr) {
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i].occupied && slots[i].addr == addr) return static_cast<int>(i);
  return -1;
}

inline int find_free_slot(const std::vector<ColibriSlot>& slots) {
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (!slots[i].occupied) return static_cast<int>(i);
  return -1;
}

}  // namespace colibrisim
