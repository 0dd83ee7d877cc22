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

#include <string>
#include <vector>

#include "colibrisim/core_types.hpp"

namespace colibrisim {

/// Static parameters of one simulation instance. Banks serve one request per
/// cycle; every core<->bank channel has the same constant latency (uniform
/// crossbar abstraction).
struct SimConfig {
  std::uint32_t n_cores = 1;
  std::uint32_t n_banks = 1;
  Cycle channel_latency = 5;
  std::uint32_t bank_service_rate = 1;  // fixed at 1 op/cycle
  AdapterKind adapter = AdapterKind::PlainLrSc;
  std::uint32_t bounded_q = 1;       // queue capacity for lrscwait-bounded
  std::uint32_t slots_per_bank = 1;  // queue (address) slots for colibri
  Cycle backoff_cycles = 128;        // after a failed SC / failed lock acquire
  Cycle fail_retry_cycles = 0;       // after a FailResp (queue/slot full)
  std::uint64_t seed = 1;
  Mutation mutation = Mutation::None;
  bool trace_protocol_detail = false;
  std::uint32_t address_words = 64;  // simulated word-address space

  /// Throws ConfigError on hard violations; returns human-readable warnings
  /// for accepted-but-unusual parameters.
  std::vector<std::string> validate() const {
    std::vector<std::string> warnings;
    if (n_cores < 1) throw ConfigError("n_cores must be >= 1");
    if (n_banks < 1) throw ConfigError("n_banks must be >= 1");
    if (bank_service_rate != 1) throw ConfigError("bank_service_rate is fixed at 1");
    if (adapter == AdapterKind::LrscWaitBounded && bounded_q < 1)
      throw ConfigError("bounded_q must be >= 1");
    if (address_words < 1) throw ConfigError("address_words must be >= 1");
    if (adapter == AdapterKind::Colibri) {
      if (slots_per_bank < 1) throw ConfigError("slots_per_bank must be >= 1");
      if (slots_per_bank != 1 && slots_per_bank != 2 && slots_per_bank != 4 &&
          slots_per_bank != 8)
        warnings.push_back("slots_per_bank=" + std::to_string(slots_per_bank) +
                           " is outside the usual {1,2,4,8} range");
    }
    return warnings;
  }

  BankId bank_of(Word addr) const { return static_cast<BankId>(addr % n_banks); }
  std::size_t row_of(Word addr) const { return static_cast<std::size_t>(addr / n_banks); }
};

// ---------------------------------------------------------------------------
// Core programs
// ---------------------------------------------------------------------------

enum class ProgramKind : std::uint8_t {
  Idle,
  RmwLoop,
  LockedCs,
  QueueOps,
  WorkerStream,
  DirectOps,
};

inline const char* to_string(ProgramKind k) {
  switch (k) {
    case ProgramKind::Idle: return "idle";
    case ProgramKind::RmwLoop: return "rmw-loop";
    case ProgramKind::LockedCs: return "locked-cs";
    case ProgramKind::QueueOps: return "queue-ops";
    case ProgramKind::WorkerStream: return "worker-stream";
    case ProgramKind::DirectOps: return "direct-ops";
  }
  return "?";
}

enum class Flavor : std::uint8_t {
  AmoAdd,
  LrSc,
  LrscWait,  // runs on lrscwait-ideal or lrscwait-bounded adapters
  Colibri,   // same core-side sequence as LrscWait, on the colibri adapter
  SpinLockAmo,
  SpinLockLrSc,
  SpinLockColibri,
  McsMwaitLock,
};

inline const char* to_string(Flavor f) {
  switch (f) {
    case Flavor::AmoAdd: return "amo-add";
    case Flavor::LrSc: return "lrsc";
    case Flavor::LrscWait: return "lrscwait";
    case Flavor::Colibri: return "colibri";
    case Flavor::SpinLockAmo: return "spinlock-amo";
    case Flavor::SpinLockLrSc: return "spinlock-lrsc";
    case Flavor::SpinLockColibri: return "spinlock-colibri";
    case Flavor::McsMwaitLock: return "mcs-mwait";
  }
  return "?";
}

inline bool parse_flavor(const std::string& s, Flavor& out) {
  for (int i = 0; i <= static_cast<int>(Flavor::McsMwaitLock); ++i) {
    auto f = static_cast<Flavor>(i);
    if (s == to_string(f)) {
      out = f;
      return true;
    }
  }
  return false;
}

/// True if the flavor's message sequence is legal on the given bank adapter.
inline bool flavor_fits_adapter(Flavor f, AdapterKind a) {
  switch (f) {
    case Flavor::AmoAdd:
    case Flavor::SpinLockAmo:
      return true;  // loads/stores/AMOs work on every adapter
    case Flavor::LrSc:
    case Flavor::SpinLockLrSc:
      return a == AdapterKind::PlainLrSc;
    case Flavor::LrscWait:
      return a == AdapterKind::LrscWaitIdeal || a == AdapterKind::LrscWaitBounded ||
             a == AdapterKind::Colibri;
    case Flavor::Colibri:
    case Flavor::SpinLockColibri:
    case Flavor::McsMwaitLock:
      return a == AdapterKind::Colibri || a == AdapterKind::LrscWaitIdeal ||
             a == AdapterKind::LrscWaitBounded;
  }
  return false;
}

/// One scripted memory operation for direct-ops programs (verification
/// scenarios and unit tests drive exact message sequences with these).
struct DirectOp {
  MsgKind kind = MsgKind::Load;
  Word addr = 0;
  Word value = 0;
  Word expected = 0;
  Cycle delay_before = 0;  // local wait before issuing
};

enum class QueueMode : std::uint8_t {
  PushPopLoop,        // steady-state benchmark pattern: (push, pop) per iteration
  PushAllThenPopAll,  // oracle pattern: quota pushes, then quota pops
};

/// A scripted workload for one core. Field applicability depends on `kind`.
struct CoreProgram {
  ProgramKind kind = ProgramKind::Idle;
  Flavor flavor = Flavor::AmoAdd;
  std::uint32_t iterations = 1;
  std::vector<Word> targets;  // RmwLoop bins / LockedCs bins / DirectOps unused

  Cycle start_delay = 0;
  Cycle loop_overhead = 16;  // inter-iteration gap: loop bookkeeping stand-in
  Cycle compute_cycles = 1;  // gap between a load response and the paired store
  Cycle cs_length = 3;       // LockedCs critical-section body length
  std::uint32_t retry_limit = 0;  // 0 = retry forever; >0 = give up after N retries/op

  // LockedCs / QueueOps shared-word layout (filled by workload builders).
  Word lock_base = 0;      // ticket pairs / spin words / MCS tails start here
  Word mcs_node_base = 0;  // per-core {next, flag} pairs
  Word queue_head = 0;
  Word queue_tail = 0;
  Word queue_slot_base = 0;
  QueueMode queue_mode = QueueMode::PushPopLoop;

  // WorkerStream.
  std::uint32_t stream_length = 0;
  Word region_base = 0;
  Word region_words = 1;
  Word region_offset = 0;  // starting phase within the region
  Cycle stream_gap = 0;

  std::vector<DirectOp> ops;  // DirectOps

  bool random_bins = true;  // RmwLoop: pick bins with the run RNG; else round-robin
};

/// Everything immutable over one run: configuration, per-core programs and
/// initial memory contents. Mutable simulation state lives in SimState.
struct RunSetup {
  SimConfig cfg;
  std::vector<CoreProgram> programs;
  std::vector<std::pair<Word, Word>> mem_init;

  void validate() const {
    cfg.validate();
    if (programs.size() != cfg.n_cores)
      throw ConfigError("program count must equal n_cores");
    for (const auto& p : programs) {
      if (p.kind == ProgramKind::Idle || p.kind == ProgramKind::DirectOps ||
          p.kind == ProgramKind::WorkerStream)
        continue;
      if (p.iterations < 1) throw ConfigError("iterations must be >= 1");
      if (!flavor_fits_adapter(p.flavor, cfg.adapter))
        throw ConfigError(std::string("flavor ") + to_string(p.flavor) +
                          " cannot run on adapter " + to_string(cfg.adapter));
      if ((p.kind == ProgramKind::RmwLoop || p.kind == ProgramKind::LockedCs) &&
          p.targets.empty())
        throw ConfigError("RmwLoop/LockedCs needs at least one target address");
    }
  }
};

}  // namespace colibrisim
