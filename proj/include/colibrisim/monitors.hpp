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

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "colibrisim/core_types.hpp"

namespace colibrisim {

enum class Property : std::uint8_t {
  MutualExclusion,
  AtomicityOracle,
  FifoService,
  NoLostWakeup,
  DeadlockFree,
  StarvationFree,
  ColibriEqualsIdeal,
  ProtocolInvariants,
};

inline const char* to_string(Property p) {
  switch (p) {
    case Property::MutualExclusion: return "MutualExclusion";
    case Property::AtomicityOracle: return "AtomicityOracle";
    case Property::FifoService: return "FifoService";
    case Property::NoLostWakeup: return "NoLostWakeup";
    case Property::DeadlockFree: return "DeadlockFree";
    case Property::StarvationFree: return "StarvationFree";
    case Property::ColibriEqualsIdeal: return "ColibriEqualsIdeal";
    case Property::ProtocolInvariants: return "ProtocolInvariants";
  }
  return "?";
}

struct Violation {
  Property prop;
  Cycle cycle = 0;
  std::string detail;
};

/// Online run monitors. These recompute the protocol's externally visible
/// guarantees from the message stream alone (grants, commits, writes), so a
/// defect in the adapters' own bookkeeping shows up as a disagreement here.
/// Monitor state is part of the canonical state the verifier hashes.
struct Monitors {
  // Per-address write version; bumped on every committed write.
  std::map<Word, std::uint64_t> write_version;
  // Accepted-but-unserved waiters per address, in controller arrival order.
  std::map<Word, std::deque<CoreId>> service_fifo;
  // Core currently holding a served-but-uncommitted wait reservation per
  // address, plus the write version at grant time.
  std::map<Word, CoreId> holder;
  std::map<Word, std::uint64_t> holder_version;
  // Shadow memory replayed from observed committed writes.
  std::map<Word, Word> shadow;
  // What each core is waiting for (exactly-one-response accounting).
  struct PendingReq {
    bool active = false;
    MsgKind kind = MsgKind::Load;
    Word addr = 0;
    Word value = 0;
  };
  std::vector<PendingReq> pending;
  // Workload-level critical sections: lock id -> holding core.
  std::map<Word, CoreId> lock_holder;

  std::vector<Violation> violations;

  void init(std::uint32_t n_cores, const std::vector<std::pair<Word, Word>>& mem_init) {
    pending.assign(n_cores, {});
    for (const auto& [a, v] : mem_init) shadow[a] = v;
  }

  void fail(Property p, Cycle cyc, std::string detail) {
    violations.push_back({p, cyc, std::move(detail)});
  }

  bool clean() const { return violations.empty(); }

  // -- request/response accounting ----------------------------------------

  void on_request_sent(Cycle cyc, CoreId core, const Message& m) {
    auto& p = pending.at(core);
    if (p.active)
      fail(Property::NoLostWakeup, cyc,
           "core" + std::to_string(core) + " sent " + to_string(m.kind) +
               " with a response still outstanding");
    p = {true, m.kind, m.addr, m.value};
  }

  void on_response_delivered(Cycle cyc, CoreId core, const Message& m) {
    auto& p = pending.at(core);
    if (!p.active) {
      fail(Property::NoLostWakeup, cyc,
           "core" + std::to_string(core) + " received unsolicited " + to_string(m.kind));
      return;
    }
    p.active = false;
  }

  // -- wait-queue service order and one-at-a-time grants -------------------

  void on_wait_accepted(Cycle cyc, Word addr, CoreId core) {
    (void)cyc;
    service_fifo[addr].push_back(core);
  }

  /// A deferred response (LrWaitResp or MwaitResp) leaves the controller.
  void on_wait_granted(Cycle cyc, Word addr, CoreId core, bool is_mwait) {
    auto it = service_fifo.find(addr);
    if (it == service_fifo.end() || it->second.empty()) {
      fail(Property::FifoService, cyc,
           "grant to core" + std::to_string(core) + " at addr " + std::to_string(addr) +
               " with no accepted waiter");
    } else if (it->second.front() != core) {
      fail(Property::FifoService, cyc,
           "grant order broken at addr " + std::to_string(addr) + ": expected core" +
               std::to_string(it->second.front()) + ", granted core" + std::to_string(core));
      for (auto q = it->second.begin(); q != it->second.end(); ++q)
        if (*q == core) {
          it->second.erase(q);
          break;
        }
    } else {
      it->second.pop_front();
      if (it->second.empty()) service_fifo.erase(it);
    }
    if (auto h = holder.find(addr); h != holder.end())
      fail(Property::MutualExclusion, cyc,
           "grant to core" + std::to_string(core) + " while core" +
               std::to_string(h->second) + " still holds addr " + std::to_string(addr));
    if (!is_mwait) {
      holder[addr] = core;
      holder_version[addr] = write_version[addr];
    }
  }

  /// The holder's SCwait reached the controller (commit attempt).
  void on_wait_commit(Cycle cyc, Word addr, CoreId core, bool success) {
    auto h = holder.find(addr);
    if (h != holder.end() && h->second == core) {
      if (success && write_version[addr] != holder_version[addr])
        fail(Property::AtomicityOracle, cyc,
             "core" + std::to_string(core) + " committed addr " + std::to_string(addr) +
                 " despite an intervening write");
      holder.erase(h);
      holder_version.erase(addr);
    } else if (success) {
      fail(Property::MutualExclusion, cyc,
           "core" + std::to_string(core) + " committed addr " + std::to_string(addr) +
               " without holding the reservation");
    }
  }

  // -- committed writes -----------------------------------------------------

  void on_write(Word addr, Word value) {
    ++write_version[addr];
    shadow[addr] = value;
  }

  void on_amo_add(Word addr, Word delta) {
    ++write_version[addr];
    shadow[addr] += delta;
  }

  // -- workload-level critical sections ------------------------------------

  void on_cs_enter(Cycle cyc, Word lock, CoreId core) {
    auto [it, fresh] = lock_holder.try_emplace(lock, core);
    if (!fresh)
      fail(Property::MutualExclusion, cyc,
           "core" + std::to_string(core) + " entered lock " + std::to_string(lock) +
               " held by core" + std::to_string(it->second));
  }

  void on_cs_exit(Cycle cyc, Word lock, CoreId core) {
    auto it = lock_holder.find(lock);
    if (it == lock_holder.end() || it->second != core)
      fail(Property::MutualExclusion, cyc,
           "core" + std::to_string(core) + " released lock " + std::to_string(lock) +
               " it does not hold");
    else
      lock_holder.erase(it);
  }

  // -- protocol consistency flags ------------------------------------------

  void protocol_flag(Cycle cyc, std::string detail) {
    fail(Property::ProtocolInvariants, cyc, std::move(detail));
  }
};

}  // namespace colibrisim
