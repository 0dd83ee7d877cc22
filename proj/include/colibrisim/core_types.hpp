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
#include <stdexcept>
#include <string>

namespace colibrisim {

using Word = std::uint64_t;
using Cycle = std::uint64_t;
using CoreId = std::uint32_t;
using BankId = std::uint32_t;

inline constexpr CoreId kNoCore = 0xffffffffu;

/// Raised on malformed user input (config files, CLI arguments, traces).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when the simulation model itself is driven outside its contract
/// (e.g. scheduling an event in the past, a second outstanding LRwait).
struct ModelError : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ModelError(what);
}

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

enum class MsgKind : std::uint8_t {
  Load,
  Store,
  AmoAdd,
  LrReq,
  ScReq,
  LrWaitReq,
  ScWaitReq,
  MwaitReq,
  LrWaitResp,
  ScWaitResp,
  MwaitResp,
  LoadResp,
  StoreAck,
  AmoResp,
  SuccessorUpdate,
  WakeUpRequest,
  FailResp,
};

inline const char* to_string(MsgKind k) {
  switch (k) {
    case MsgKind::Load: return "Load";
    case MsgKind::Store: return "Store";
    case MsgKind::AmoAdd: return "AmoAdd";
    case MsgKind::LrReq: return "LrReq";
    case MsgKind::ScReq: return "ScReq";
    case MsgKind::LrWaitReq: return "LrWaitReq";
    case MsgKind::ScWaitReq: return "ScWaitReq";
    case MsgKind::MwaitReq: return "MwaitReq";
    case MsgKind::LrWaitResp: return "LrWaitResp";
    case MsgKind::ScWaitResp: return "ScWaitResp";
    case MsgKind::MwaitResp: return "MwaitResp";
    case MsgKind::LoadResp: return "LoadResp";
    case MsgKind::StoreAck: return "StoreAck";
    case MsgKind::AmoResp: return "AmoResp";
    case MsgKind::SuccessorUpdate: return "SuccessorUpdate";
    case MsgKind::WakeUpRequest: return "WakeUpRequest";
    case MsgKind::FailResp: return "FailResp";
  }
  return "?";
}

bool parse_msg_kind(const std::string& s, MsgKind& out);

inline bool parse_msg_kind(const std::string& s, MsgKind& out) {
  for (int i = 0; i <= static_cast<int>(MsgKind::FailResp); ++i) {
    auto k = static_cast<MsgKind>(i);
    if (s == to_string(k)) {
      out = k;
      return true;
    }
  }
  return false;
}

/// A request travelling core->bank, or a response / protocol message
/// travelling bank->core. One struct covers all kinds; unused fields stay
/// at their defaults and are omitted from traces.
struct Message {
  MsgKind kind = MsgKind::Load;
  Word addr = 0;
  Word value = 0;
  CoreId requester = kNoCore;  // issuing core for requests
  Word expected = 0;           // Mwait only
  CoreId successor = kNoCore;  // SuccessorUpdate / WakeUpRequest only

  bool operator==(const Message&) const = default;
};

inline bool is_core_request(MsgKind k) {
  switch (k) {
    case MsgKind::Load:
    case MsgKind::Store:
    case MsgKind::AmoAdd:
    case MsgKind::LrReq:
    case MsgKind::ScReq:
    case MsgKind::LrWaitReq:
    case MsgKind::ScWaitReq:
    case MsgKind::MwaitReq:
      return true;
    default:
      return false;
  }
}

// ---------------------------------------------------------------------------
// Endpoints and events
// ---------------------------------------------------------------------------

enum class EndpointKind : std::uint8_t { Core, Bank };

struct Endpoint {
  EndpointKind kind = EndpointKind::Core;
  std::uint32_t id = 0;

  bool operator==(const Endpoint&) const = default;

  static Endpoint core(CoreId c) { return {EndpointKind::Core, c}; }
  static Endpoint bank(BankId b) { return {EndpointKind::Bank, b}; }
};

inline std::string to_string(const Endpoint& e) {
  return (e.kind == EndpointKind::Core ? "core" : "bank") + std::to_string(e.id);
}

inline bool parse_endpoint(const std::string& s, Endpoint& out) {
  if (s.rfind("core", 0) == 0) {
    out = Endpoint::core(static_cast<std::uint32_t>(std::stoul(s.substr(4))));
    return true;
  }
  if (s.rfind("bank", 0) == 0) {
    out = Endpoint::bank(static_cast<std::uint32_t>(std::stoul(s.substr(4))));
    return true;
  }
  return false;
}

enum class EvKind : std::uint8_t { Deliver, CoreResume, BankService };

struct Event {
  Cycle at = 0;
  std::uint64_t seq = 0;  // global send sequence number; tie-break at equal cycles
  EvKind kind = EvKind::Deliver;
  Endpoint src;
  Endpoint dst;
  Message msg;
};

/// Min-heap ordering: earliest cycle first, then lowest sequence number.
struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.at != b.at) return a.at > b.at;
    return a.seq > b.seq;
  }
};

/// A message handed to the scheduler with its delivery delay still open.
/// The normal runner assigns the configured channel latency; the verifier
/// branches over a set of delay choices.
struct Outgoing {
  Endpoint src;
  Endpoint dst;
  Message msg;
};

// ---------------------------------------------------------------------------
// Adapter kinds, mutations, run outcomes
// ---------------------------------------------------------------------------

enum class AdapterKind : std::uint8_t {
  PlainLrSc,
  AmoOnly,
  LrscWaitIdeal,
  LrscWaitBounded,
  Colibri,
};

inline const char* to_string(AdapterKind k) {
  switch (k) {
    case AdapterKind::PlainLrSc: return "plain-lrsc";
    case AdapterKind::AmoOnly: return "amo-only";
    case AdapterKind::LrscWaitIdeal: return "lrscwait-ideal";
    case AdapterKind::LrscWaitBounded: return "lrscwait-bounded";
    case AdapterKind::Colibri: return "colibri";
  }
  return "?";
}

inline bool parse_adapter_kind(const std::string& s, AdapterKind& out) {
  for (int i = 0; i <= static_cast<int>(AdapterKind::Colibri); ++i) {
    auto k = static_cast<AdapterKind>(i);
    if (s == to_string(k)) {
      out = k;
      return true;
    }
  }
  return false;
}

inline bool adapter_supports_wait(AdapterKind k) {
  return k == AdapterKind::LrscWaitIdeal || k == AdapterKind::LrscWaitBounded ||
         k == AdapterKind::Colibri;
}

/// Seeded protocol defects for mutation testing of the verifier.
enum class Mutation : std::uint8_t {
  None,
  DropSuccessorUpdate,
  SkipHeadInvalidation,
  WakeWrongSuccessor,
  DoubleResponse,
  SkipStoreInvalidation,
};

inline const char* to_string(Mutation m) {
  switch (m) {
    case Mutation::None: return "none";
    case Mutation::DropSuccessorUpdate: return "drop-successor-update";
    case Mutation::SkipHeadInvalidation: return "skip-head-invalidation";
    case Mutation::WakeWrongSuccessor: return "wake-wrong-successor";
    case Mutation::DoubleResponse: return "double-response";
    case Mutation::SkipStoreInvalidation: return "skip-store-invalidation";
  }
  return "?";
}

inline bool parse_mutation(const std::string& s, Mutation& out) {
  for (int i = 0; i <= static_cast<int>(Mutation::SkipStoreInvalidation); ++i) {
    auto m = static_cast<Mutation>(i);
    if (s == to_string(m)) {
      out = m;
      return true;
    }
  }
  return false;
}

enum class RunOutcome : std::uint8_t { Completed, BudgetExhausted, Deadlock };

inline const char* to_string(RunOutcome o) {
  switch (o) {
    case RunOutcome::Completed: return "completed";
    case RunOutcome::BudgetExhausted: return "budget-exhausted";
    case RunOutcome::Deadlock: return "deadlock";
  }
  return "?";
}

}  // namespace colibrisim
