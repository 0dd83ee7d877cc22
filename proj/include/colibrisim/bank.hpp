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
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "colibrisim/core_types.hpp"

namespace colibrisim {

// ---------------------------------------------------------------------------
// Per-bank adapter state
// ---------------------------------------------------------------------------

/// Baseline LR/SC: a single reservation slot per bank. A new LR displaces
/// whatever reservation the slot held; invalidation is per word address.
struct BaselineSlot {
  bool valid = false;
  CoreId core = kNoCore;
  Word addr = 0;

  bool operator==(const BaselineSlot&) const = default;
};

struct WaitEntry {
  CoreId core = kNoCore;
  bool is_mwait = false;
  Word expected = 0;

  bool operator==(const WaitEntry&) const = default;
};

/// Controller-local reservation queue (ideal and bounded LRwait variants).
/// `armed` is the head's reservation (LRwait) or monitor (Mwait); a committed
/// write to the address clears it.
struct WaitQueue {
  std::deque<WaitEntry> entries;
  bool armed = false;

  bool operator==(const WaitQueue&) const = default;
};

struct Bank {
  std::vector<Word> mem;  // row-addressed: global addr = row * n_banks + bank
  std::deque<Message> ingress;
  bool service_pending = false;
  Cycle next_free = 0;

  BaselineSlot lrsc;
  std::map<Word, WaitQueue> wait_queues;  // keyed by global word address
};

// ---------------------------------------------------------------------------
// Storage cost model
// ---------------------------------------------------------------------------

inline std::uint64_t ceil_log2(std::uint64_t n) {
  if (n <= 1) return 0;
  std::uint64_t bits = 0;
  std::uint64_t v = n - 1;
  while (v > 0) {
    v >>= 1;
    ++bits;
  }
  return bits;
}

/// Core-identifier storage (bits) for the monolithic reservation queue:
/// an n-entry queue of log2(n)-bit core ids in front of each of m banks.
inline std::uint64_t cost_bits_ideal(std::uint64_t n_cores, std::uint64_t n_banks) {
  return n_cores * ceil_log2(n_cores) * n_banks;
}

/// Same structure truncated to q entries per bank.
inline std::uint64_t cost_bits_bounded(std::uint64_t n_cores, std::uint64_t n_banks,
                                       std::uint64_t q) {
  return q * ceil_log2(n_cores) * n_banks;
}

/// Distributed queue: one queue node per core plus a head and a tail
/// register per queue slot per bank, each holding a core identifier.
inline std::uint64_t cost_bits_colibri(std::uint64_t n_cores, std::uint64_t n_banks,
                                       std::uint64_t addrs_per_bank) {
  return n_cores * ceil_log2(n_cores) +
         2 * addrs_per_bank * ceil_log2(n_cores) * n_banks;
}

struct CostBreakdown {
  std::string scheme;
  std::uint64_t identifier_bits = 0;
  std::uint64_t per_bank_entries = 0;  // queue entries or head/tail registers per bank
  std::uint64_t core_side_bits = 0;    // queue-node identifier bits at the cores
  // Each queue entry additionally needs a valid bit and the reserved word
  // address; those are constant per entry and excluded from identifier_bits.
};

inline CostBreakdown cost_model(AdapterKind scheme, std::uint64_t n_cores,
                                std::uint64_t n_banks, std::uint64_t q,
                                std::uint64_t addrs_per_bank) {
  require(n_cores >= 1 && n_banks >= 1, "cost model needs positive core/bank counts");
  CostBreakdown b;
  b.scheme = to_string(scheme);
  switch (scheme) {
    case AdapterKind::LrscWaitIdeal:
      b.identifier_bits = cost_bits_ideal(n_cores, n_banks);
      b.per_bank_entries = n_cores;
      break;
    case AdapterKind::LrscWaitBounded:
      require(q >= 1, "bounded scheme needs q >= 1");
      b.identifier_bits = cost_bits_bounded(n_cores, n_banks, q);
      b.per_bank_entries = q;
      break;
    case AdapterKind::Colibri:
      require(addrs_per_bank >= 1, "colibri scheme needs addrs_per_bank >= 1");
      b.identifier_bits = cost_bits_colibri(n_cores, n_banks, addrs_per_bank);
      b.per_bank_entries = 2 * addrs_per_bank;
      b.core_side_bits = n_cores * ceil_log2(n_cores);
      break;
    case AdapterKind::PlainLrSc:
      b.identifier_bits = ceil_log2(n_cores) * n_banks;  // one slot per bank
      b.per_bank_entries = 1;
      break;
    case AdapterKind::AmoOnly:
      b.identifier_bits = 0;
      break;
  }
  return b;
}

}  // namespace colibrisim
