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

#include <algorithm>
#include <queue>
#include <vector>

#include "colibrisim/bank.hpp"
#include "colibrisim/colibri.hpp"
#include "colibrisim/config.hpp"
#include "colibrisim/monitors.hpp"
#include "colibrisim/program.hpp"
#include "colibrisim/rng.hpp"
#include "colibrisim/trace.hpp"

namespace colibrisim {

struct Stats {
  std::uint64_t hops = 0;             // delivered core<->bank messages
  std::uint64_t bank_accesses = 0;    // bank service slots consumed
  std::uint64_t deliveries_scheduled = 0;
  std::uint64_t deliveries_done = 0;
  bool snapshot_taken = false;
  std::vector<std::uint64_t> ops_at_first_done;  // per-core ops when the first core finished
};

/// The complete mutable state of one simulation instance. Value-copyable:
/// the verifier clones it to branch over delivery interleavings.
struct SimState {
  Cycle now = 0;
  std::uint64_t next_seq = 0;
  std::priority_queue<Event, std::vector<Event>, EventAfter> events;
  std::vector<Bank> banks;
  std::vector<std::vector<ColibriSlot>> slots;  // [bank][slot]; empty unless colibri
  std::vector<QNode> qnodes;
  std::vector<CoreRt> cores;
  std::vector<Cycle> chan_last;           // FIFO clamp: last scheduled delivery per channel
  std::vector<Cycle> chan_delivered_at;   // FIFO assertion bookkeeping
  std::vector<std::uint64_t> chan_delivered_seq;
  Monitors mon;
  Stats stats;
  bool log_commits = false;
};

namespace detail {
enum class Trigger : std::uint8_t { Resume, Resp };
}

/// Stateless event processor: all mutable data lives in the SimState that is
/// passed in, so the verifier can fork states freely. Outgoing messages are
/// returned with their delivery delay unassigned; the normal runner applies
/// the configured channel latency, the verifier branches over delay choices.
class Kernel {
 public:
  explicit Kernel(const RunSetup& su) : su_(&su) {}

  ITraceSink* sink = nullptr;

  const RunSetup& setup() const { return *su_; }

  void init_state(SimState& st) const {
    const SimConfig& cfg = su_->cfg;
    st = SimState{};
    const std::size_t rows = cfg.address_words / cfg.n_banks + 2;
    st.banks.assign(cfg.n_banks, Bank{});
    for (auto& b : st.banks) b.mem.assign(rows, 0);
    st.slots.assign(cfg.n_banks,
                    std::vector<ColibriSlot>(
                        cfg.adapter == AdapterKind::Colibri ? cfg.slots_per_bank : 0));
    st.qnodes.assign(cfg.n_cores, QNode{});
    st.cores.assign(cfg.n_cores, CoreRt{});
    const std::size_t n_chan = 2ull * cfg.n_cores * cfg.n_banks;
    st.chan_last.assign(n_chan, 0);
    st.chan_delivered_at.assign(n_chan, 0);
    st.chan_delivered_seq.assign(n_chan, 0);
    st.mon.init(cfg.n_cores, su_->mem_init);
    for (const auto& [a, v] : su_->mem_init) word_at(st, a) = v;
    for (CoreId c = 0; c < cfg.n_cores; ++c)
      push_event(st, {su_->programs[c].start_delay, st.next_seq++, EvKind::CoreResume,
                      Endpoint::core(c), Endpoint::core(c), {}});
  }

  /// Pops and processes the earliest pending event. Returns false when no
  /// events remain. Outgoing messages are appended to `out` unassigned.
  bool step(SimState& st, std::vector<Outgoing>& out) const {
    if (st.events.empty()) return false;
    Event ev = st.events.top();
    st.events.pop();
    require(ev.at >= st.now, "event scheduled in the past");
    st.now = ev.at;
    process(st, ev, out);
    return true;
  }

  /// Assigns a delivery delay and enqueues the message, enforcing per-channel
  /// FIFO: a message never overtakes an earlier one on the same channel.
  void dispatch(SimState& st, const Outgoing& o, Cycle delay) const {
    Cycle at = st.now + delay;
    const std::size_t ci = chan_index(o.src, o.dst);
    at = std::max(at, st.chan_last[ci]);
    st.chan_last[ci] = at;
    push_event(st, {at, st.next_seq++, EvKind::Deliver, o.src, o.dst, o.msg});
    ++st.stats.deliveries_scheduled;
  }

  /// Test/driver hook implementing the raw scheduling contract.
  void schedule(SimState& st, Event ev) const {
    require(ev.at >= st.now, "deliver-at must be >= the current cycle");
    ev.seq = st.next_seq++;
    push_event(st, ev);
    if (ev.kind == EvKind::Deliver) ++st.stats.deliveries_scheduled;
  }

  RunOutcome run_to_quiescence(SimState& st, Cycle max_cycles) const {
    std::vector<Outgoing> out;
    while (!st.events.empty()) {
      if (st.events.top().at > max_cycles) return RunOutcome::BudgetExhausted;
      step(st, out);
      for (const auto& o : out) dispatch(st, o, su_->cfg.channel_latency);
      out.clear();
    }
    return all_done(st) ? RunOutcome::Completed : RunOutcome::Deadlock;
  }

  bool all_done(const SimState& st) const {
    return std::all_of(st.cores.begin(), st.cores.end(),
                       [](const CoreRt& c) { return c.done; });
  }

  Word& word_at(SimState& st, Word addr) const {
    return st.banks[su_->cfg.bank_of(addr)].mem[su_->cfg.row_of(addr)];
  }

  Word read_word(const SimState& st, Word addr) const {
    return st.banks[su_->cfg.bank_of(addr)].mem[su_->cfg.row_of(addr)];
  }

  /// Emits the end-of-run summary lines (final memory words, per-core totals).
  void emit_summary(const SimState& st) const {
    if (!sink) return;
    for (const auto& [addr, val] : st.mon.shadow) {
      const BankId b = su_->cfg.bank_of(addr);
      TraceLine t;
      t.cycle = st.now;
      t.src = t.dst = Endpoint::bank(b);
      t.kind = "MemWord";
      t.fields = {{"addr", std::to_string(addr)},
                  {"value", std::to_string(read_word(st, addr))}};
      sink->line(t);
    }
    for (CoreId c = 0; c < su_->cfg.n_cores; ++c) {
      const CoreRt& cr = st.cores[c];
      TraceLine t;
      t.cycle = st.now;
      t.src = t.dst = Endpoint::core(c);
      t.kind = "CoreDone";
      t.fields = {{"ops", std::to_string(cr.ops)},
                  {"retries", std::to_string(cr.retries)},
                  {"msgs", std::to_string(cr.msgs_sent)},
                  {"done", cr.done ? "1" : "0"}};
      sink->line(t);
    }
  }

 private:
  const RunSetup* su_;

  void push_event(SimState& st, Event ev) const { st.events.push(std::move(ev)); }

  std::size_t chan_index(const Endpoint& src, const Endpoint& dst) const {
    const SimConfig& cfg = su_->cfg;
    if (src.kind == EndpointKind::Core)
      return static_cast<std::size_t>(src.id) * cfg.n_banks + dst.id;
    return static_cast<std::size_t>(cfg.n_cores) * cfg.n_banks +
           static_cast<std::size_t>(src.id) * cfg.n_cores + dst.id;
  }

  // ---------------------------------------------------------------------
  // Event processing
  // ---------------------------------------------------------------------

  void process(SimState& st, const Event& ev, std::vector<Outgoing>& out) const {
    switch (ev.kind) {
      case EvKind::Deliver: {
        ++st.stats.hops;
        ++st.stats.deliveries_done;
        const std::size_t ci = chan_index(ev.src, ev.dst);
        require(ev.at >= st.chan_delivered_at[ci] &&
                    (st.chan_delivered_seq[ci] == 0 || ev.seq > st.chan_delivered_seq[ci]),
                "channel FIFO order violated");
        st.chan_delivered_at[ci] = ev.at;
        st.chan_delivered_seq[ci] = ev.seq;
        if (sink) sink->line(message_line(ev.at, ev.src, ev.dst, ev.msg));
        if (ev.dst.kind == EndpointKind::Bank) {
          Bank& b = st.banks[ev.dst.id];
          b.ingress.push_back(ev.msg);
          if (!b.service_pending) {
            b.service_pending = true;
            push_event(st, {std::max(st.now, b.next_free), st.next_seq++,
                            EvKind::BankService, ev.dst, ev.dst, {}});
          }
        } else {
          core_deliver(st, ev, out);
        }
        break;
      }
      case EvKind::BankService:
        bank_service(st, ev.dst.id, out);
        break;
      case EvKind::CoreResume:
        core_trigger(st, ev.dst.id, detail::Trigger::Resume, nullptr, out);
        break;
    }
  }

  void bank_service(SimState& st, BankId b, std::vector<Outgoing>& out) const {
    Bank& bank = st.banks[b];
    require(!bank.ingress.empty(), "bank service with empty ingress queue");
    Message m = bank.ingress.front();
    bank.ingress.pop_front();
    bank.next_free = st.now + 1;
    ++st.stats.bank_accesses;
    serve_bank_msg(st, b, m, out);
    if (!bank.ingress.empty())
      push_event(st, {st.now + 1, st.next_seq++, EvKind::BankService, Endpoint::bank(b),
                      Endpoint::bank(b), {}});
    else
      bank.service_pending = false;
  }

  void respond(SimState&, BankId b, CoreId core, Message m,
               std::vector<Outgoing>& out) const {
    out.push_back({Endpoint::bank(b), Endpoint::core(core), m});
  }

  // ---------------------------------------------------------------------
  // Bank adapters
  // ---------------------------------------------------------------------

  void serve_bank_msg(SimState& st, BankId b, const Message& m,
                      std::vector<Outgoing>& out) const {
    const AdapterKind ak = su_->cfg.adapter;
    switch (m.kind) {
      case MsgKind::Load:
        respond(st, b, m.requester,
                {MsgKind::LoadResp, m.addr, read_word(st, m.addr)}, out);
        break;
      case MsgKind::Store:
        apply_write(st, b, m.addr, m.value, /*is_add=*/false, /*is_plain_store=*/true, out);
        respond(st, b, m.requester, {MsgKind::StoreAck, m.addr}, out);
        break;
      case MsgKind::AmoAdd: {
        const Word old = read_word(st, m.addr);
        apply_write(st, b, m.addr, m.value, /*is_add=*/true, false, out);
        respond(st, b, m.requester, {MsgKind::AmoResp, m.addr, old}, out);
        break;
      }
      case MsgKind::LrReq: {
        require(ak == AdapterKind::PlainLrSc, "LR on an adapter without LR/SC support");
        Bank& bank = st.banks[b];
        bank.lrsc = {true, m.requester, m.addr};  // displaces any previous reservation
        respond(st, b, m.requester,
                {MsgKind::LoadResp, m.addr, read_word(st, m.addr)}, out);
        break;
      }
      case MsgKind::ScReq: {
        require(ak == AdapterKind::PlainLrSc, "SC on an adapter without LR/SC support");
        Bank& bank = st.banks[b];
        const bool ok =
            bank.lrsc.valid && bank.lrsc.core == m.requester && bank.lrsc.addr == m.addr;
        if (ok) {
          bank.lrsc.valid = false;
          apply_write(st, b, m.addr, m.value, false, false, out);
        }
        respond(st, b, m.requester, {MsgKind::ScWaitResp, m.addr, ok ? 0u : 1u}, out);
        break;
      }
      case MsgKind::LrWaitReq:
      case MsgKind::MwaitReq: {
        require(adapter_supports_wait(ak), "LRwait/Mwait on a non-wait adapter");
        const bool is_mwait = m.kind == MsgKind::MwaitReq;
        if (ak == AdapterKind::Colibri)
          colibri_request(st, b, m, is_mwait, out);
        else
          wq_request(st, b, m, is_mwait, out);
        break;
      }
      case MsgKind::ScWaitReq: {
        require(adapter_supports_wait(ak), "SCwait on a non-wait adapter");
        if (ak == AdapterKind::Colibri)
          colibri_scwait(st, b, m, out);
        else
          wq_scwait(st, b, m, out);
        break;
      }
      case MsgKind::WakeUpRequest:
        require(ak == AdapterKind::Colibri, "WakeUpRequest outside colibri");
        colibri_wakeup(st, b, m, out);
        break;
      default:
        throw ModelError(std::string("bank received response kind ") + to_string(m.kind));
    }
  }

  /// Commits a write: memory update, reservation invalidation and Mwait
  /// monitor wake-ups at word-address granularity.
  void apply_write(SimState& st, BankId b, Word addr, Word value, bool is_add,
                   bool is_plain_store, std::vector<Outgoing>& out) const {
    Word& w = word_at(st, addr);
    if (is_add) {
      st.mon.on_amo_add(addr, value);
      w += value;
    } else {
      st.mon.on_write(addr, value);
      w = value;
    }
    if (su_->cfg.mutation == Mutation::SkipStoreInvalidation && is_plain_store)
      return;  // seeded defect: the write leaves reservations and monitors intact

    Bank& bank = st.banks[b];
    if (bank.lrsc.valid && bank.lrsc.addr == addr) bank.lrsc.valid = false;

    if (auto it = bank.wait_queues.find(addr); it != bank.wait_queues.end()) {
      WaitQueue& q = it->second;
      if (q.armed && !q.entries.empty()) {
        if (q.entries.front().is_mwait) {
          wq_fire_mwait_cascade(st, b, addr, out);
        } else {
          q.armed = false;  // head discovers the failure at its SCwait
        }
      }
    }
    if (su_->cfg.adapter == AdapterKind::Colibri) {
      const int i = find_slot(st.slots[b], addr);
      if (i >= 0) {
        ColibriSlot& s = st.slots[b][static_cast<std::size_t>(i)];
        if (s.reservation_valid) {
          if (s.head_is_mwait && s.head_valid)
            colibri_fire_mwait(st, b, s, out);
          else
            s.reservation_valid = false;
        }
      }
    }
  }

  // -- controller-local reservation queues (ideal / bounded) ---------------

  std::size_t wq_capacity() const {
    return su_->cfg.adapter == AdapterKind::LrscWaitIdeal ? su_->cfg.n_cores
                                                          : su_->cfg.bounded_q;
  }

  void wq_request(SimState& st, BankId b, const Message& m, bool is_mwait,
                  std::vector<Outgoing>& out) const {
    Bank& bank = st.banks[b];
    WaitQueue& q = bank.wait_queues[m.addr];
    if (q.entries.size() >= wq_capacity()) {
      if (q.entries.empty()) bank.wait_queues.erase(m.addr);
      respond(st, b, m.requester, {MsgKind::FailResp, m.addr, 1}, out);
      return;
    }
    q.entries.push_back({m.requester, is_mwait, m.expected});
    st.mon.on_wait_accepted(st.now, m.addr, m.requester);
    if (q.entries.size() == 1) wq_serve_head(st, b, m.addr, out);
  }

  /// Serves the queue head: grants an LRwait with the current value and arms
  /// the reservation, or resolves/arms an Mwait. Immediately satisfied Mwaits
  /// chain to the next waiter in the same service slot.
  void wq_serve_head(SimState& st, BankId b, Word addr, std::vector<Outgoing>& out) const {
    Bank& bank = st.banks[b];
    auto it = bank.wait_queues.find(addr);
    if (it == bank.wait_queues.end()) return;
    WaitQueue& q = it->second;
    while (!q.entries.empty()) {
      const WaitEntry head = q.entries.front();
      const Word value = read_word(st, addr);
      if (!head.is_mwait) {
        st.mon.on_wait_granted(st.now, addr, head.core, false);
        q.armed = true;
        respond(st, b, head.core, {MsgKind::LrWaitResp, addr, value}, out);
        return;
      }
      if (value != head.expected) {
        st.mon.on_wait_granted(st.now, addr, head.core, true);
        respond(st, b, head.core, {MsgKind::MwaitResp, addr, value}, out);
        q.entries.pop_front();
        continue;  // cascade to the next waiter
      }
      q.armed = true;  // monitor armed; a write to addr wakes the head
      return;
    }
    bank.wait_queues.erase(it);
  }

  /// A write hit an armed Mwait monitor: wake the head and cascade.
  void wq_fire_mwait_cascade(SimState& st, BankId b, Word addr,
                             std::vector<Outgoing>& out) const {
    Bank& bank = st.banks[b];
    auto it = bank.wait_queues.find(addr);
    if (it == bank.wait_queues.end()) return;
    WaitQueue& q = it->second;
    require(q.armed && !q.entries.empty() && q.entries.front().is_mwait,
            "mwait fire without an armed mwait head");
    q.armed = false;
    const WaitEntry head = q.entries.front();
    st.mon.on_wait_granted(st.now, addr, head.core, true);
    respond(st, b, head.core, {MsgKind::MwaitResp, addr, read_word(st, addr)}, out);
    q.entries.pop_front();
    if (q.entries.empty())
      bank.wait_queues.erase(it);
    else
      wq_serve_head(st, b, addr, out);
  }

  void wq_scwait(SimState& st, BankId b, const Message& m,
                 std::vector<Outgoing>& out) const {
    Bank& bank = st.banks[b];
    auto it = bank.wait_queues.find(m.addr);
    const bool is_head = it != bank.wait_queues.end() && !it->second.entries.empty() &&
                         it->second.entries.front().core == m.requester &&
                         !it->second.entries.front().is_mwait;
    if (!is_head) {
      st.mon.on_wait_commit(st.now, m.addr, m.requester, false);
      st.mon.protocol_flag(st.now, "SCwait from core" + std::to_string(m.requester) +
                                       " which is not the queue head of addr " +
                                       std::to_string(m.addr));
      respond(st, b, m.requester, {MsgKind::ScWaitResp, m.addr, 1}, out);
      return;
    }
    WaitQueue& q = it->second;
    const bool ok = q.armed;
    st.mon.on_wait_commit(st.now, m.addr, m.requester, ok);
    q.entries.pop_front();
    q.armed = false;
    if (ok) apply_write(st, b, m.addr, m.value, false, false, out);
    respond(st, b, m.requester, {MsgKind::ScWaitResp, m.addr, ok ? 0u : 1u}, out);
    if (q.entries.empty())
      bank.wait_queues.erase(it);
    else
      wq_serve_head(st, b, m.addr, out);  // next waiter sees the latest value
  }

  // -- colibri: distributed reservation queue -------------------------------

  void trace_slot(const SimState& st, BankId b, const ColibriSlot& s) const {
    if (!sink || !su_->cfg.trace_protocol_detail) return;
    TraceLine t;
    t.cycle = st.now;
    t.src = t.dst = Endpoint::bank(b);
    t.kind = "SlotState";
    auto id = [](CoreId c) { return c == kNoCore ? std::string("-") : std::to_string(c); };
    t.fields = {{"addr", std::to_string(s.addr)},
                {"occupied", s.occupied ? "1" : "0"},
                {"head", id(s.head)},
                {"head_valid", s.head_valid ? "1" : "0"},
                {"tail", id(s.tail)},
                {"resv", s.reservation_valid ? "1" : "0"}};
    sink->line(t);
  }

  void trace_qnode(const SimState& st, CoreId c) const {
    if (!sink || !su_->cfg.trace_protocol_detail) return;
    const QNode& n = st.qnodes[c];
    TraceLine t;
    t.cycle = st.now;
    t.src = t.dst = Endpoint::core(c);
    t.kind = "QNodePhase";
    t.fields = {{"phase", to_string(n.phase)},
                {"succ", n.has_successor ? std::to_string(n.successor) : "-"}};
    sink->line(t);
  }

  void colibri_request(SimState& st, BankId b, const Message& m, bool is_mwait,
                       std::vector<Outgoing>& out) const {
    auto& slots = st.slots[b];
    int i = find_slot(slots, m.addr);
    if (i < 0) {
      const int j = find_free_slot(slots);
      if (j < 0) {
        respond(st, b, m.requester, {MsgKind::FailResp, m.addr, 1}, out);
        return;
      }
      ColibriSlot& s = slots[static_cast<std::size_t>(j)];
      s = ColibriSlot{};
      s.occupied = true;
      s.addr = m.addr;
      s.head = s.tail = m.requester;
      s.head_valid = true;
      st.mon.on_wait_accepted(st.now, m.addr, m.requester);
      const Word value = read_word(st, m.addr);
      if (is_mwait && value != m.expected) {
        // Expected-value short-circuit: notify immediately, queue stays empty.
        st.mon.on_wait_granted(st.now, m.addr, m.requester, true);
        respond(st, b, m.requester, {MsgKind::MwaitResp, m.addr, value}, out);
        s = ColibriSlot{};
        trace_slot(st, b, s);
        return;
      }
      if (is_mwait) {
        s.head_is_mwait = true;
        s.head_expected = m.expected;
        s.reservation_valid = true;  // monitor armed
      } else {
        s.reservation_valid = true;
        st.mon.on_wait_granted(st.now, m.addr, m.requester, false);
        respond(st, b, m.requester, {MsgKind::LrWaitResp, m.addr, value}, out);
      }
      trace_slot(st, b, s);
      return;
    }
    ColibriSlot& s = slots[static_cast<std::size_t>(i)];
    const CoreId old_tail = s.tail;
    s.tail = m.requester;
    s.pending_kind[m.requester] = {is_mwait, m.expected};
    st.mon.on_wait_accepted(st.now, m.addr, m.requester);
    if (su_->cfg.mutation != Mutation::DropSuccessorUpdate) {
      Message su{MsgKind::SuccessorUpdate, m.addr};
      su.successor = m.requester;
      respond(st, b, old_tail, su, out);
    }
    if (su_->cfg.mutation == Mutation::DoubleResponse) {
      // Seeded defect: the enqueued core is also answered immediately.
      st.mon.on_wait_granted(st.now, m.addr, m.requester, is_mwait);
      respond(st, b, m.requester,
              {is_mwait ? MsgKind::MwaitResp : MsgKind::LrWaitResp, m.addr,
               read_word(st, m.addr)},
              out);
    }
    trace_slot(st, b, s);
  }

  /// Dequeues the current head after its episode resolved (SCwait processed
  /// or Mwait response sent). A sole occupant frees the slot outright; with
  /// waiters behind, the head is invalidated until the WakeUpRequest arrives.
  void colibri_dequeue_head(SimState& st, BankId b, ColibriSlot& s,
                            bool skip_invalidation) const {
    (void)st;
    (void)b;
    if (s.head == s.tail) {
      s = ColibriSlot{};
      return;
    }
    if (skip_invalidation) return;  // seeded defect
    s.head_valid = false;
    s.reservation_valid = false;
    s.head_is_mwait = false;
  }

  void colibri_scwait(SimState& st, BankId b, const Message& m,
                      std::vector<Outgoing>& out) const {
    auto& slots = st.slots[b];
    const int i = find_slot(slots, m.addr);
    const bool legal_head = i >= 0 && slots[static_cast<std::size_t>(i)].head == m.requester &&
                            slots[static_cast<std::size_t>(i)].head_valid &&
                            !slots[static_cast<std::size_t>(i)].head_is_mwait;
    if (!legal_head) {
      st.mon.on_wait_commit(st.now, m.addr, m.requester, false);
      st.mon.protocol_flag(st.now, "SCwait from core" + std::to_string(m.requester) +
                                       " which does not head the queue of addr " +
                                       std::to_string(m.addr));
      respond(st, b, m.requester, {MsgKind::ScWaitResp, m.addr, 1}, out);
      return;
    }
    ColibriSlot& s = slots[static_cast<std::size_t>(i)];
    const bool ok = s.reservation_valid;
    st.mon.on_wait_commit(st.now, m.addr, m.requester, ok);
    s.reservation_valid = false;
    colibri_dequeue_head(st, b, s,
                         su_->cfg.mutation == Mutation::SkipHeadInvalidation);
    if (ok) apply_write(st, b, m.addr, m.value, false, false, out);
    respond(st, b, m.requester, {MsgKind::ScWaitResp, m.addr, ok ? 0u : 1u}, out);
    trace_slot(st, b, s);
  }

  /// An armed Mwait monitor at a colibri head fired (a write landed).
  void colibri_fire_mwait(SimState& st, BankId b, ColibriSlot& s,
                          std::vector<Outgoing>& out) const {
    const CoreId head = s.head;
    s.reservation_valid = false;
    st.mon.on_wait_granted(st.now, s.addr, head, true);
    respond(st, b, head, {MsgKind::MwaitResp, s.addr, read_word(st, s.addr)}, out);
    colibri_dequeue_head(st, b, s, false);
    trace_slot(st, b, s);
  }

  void colibri_wakeup(SimState& st, BankId b, const Message& m,
                      std::vector<Outgoing>& out) const {
    auto& slots = st.slots[b];
    const int i = find_slot(slots, m.addr);
    if (i < 0) {
      st.mon.protocol_flag(st.now, "WakeUpRequest for addr " + std::to_string(m.addr) +
                                       " with no matching queue slot");
      return;
    }
    ColibriSlot& s = slots[static_cast<std::size_t>(i)];
    if (s.head_valid)
      st.mon.protocol_flag(st.now,
                           "WakeUpRequest arrived while the head of addr " +
                               std::to_string(m.addr) + " is still valid");
    const CoreId succ = m.successor;
    s.head = succ;
    s.head_valid = true;
    bool is_mwait = false;
    Word expected = 0;
    if (auto it = s.pending_kind.find(succ); it != s.pending_kind.end()) {
      is_mwait = it->second.first;
      expected = it->second.second;
      s.pending_kind.erase(it);
    } else {
      st.mon.protocol_flag(st.now, "WakeUpRequest promoted core" + std::to_string(succ) +
                                       " which never enqueued on addr " +
                                       std::to_string(m.addr));
    }
    const Word value = read_word(st, m.addr);
    if (!is_mwait) {
      s.head_is_mwait = false;
      s.reservation_valid = true;
      st.mon.on_wait_granted(st.now, m.addr, succ, false);
      respond(st, b, succ, {MsgKind::LrWaitResp, m.addr, value}, out);
    } else if (value != expected) {
      st.mon.on_wait_granted(st.now, m.addr, succ, true);
      respond(st, b, succ, {MsgKind::MwaitResp, m.addr, value}, out);
      colibri_dequeue_head(st, b, s, false);
    } else {
      s.head_is_mwait = true;
      s.head_expected = expected;
      s.reservation_valid = true;  // monitor armed
    }
    trace_slot(st, b, s);
  }

  // ---------------------------------------------------------------------
  // Core side: queue node hooks
  // ---------------------------------------------------------------------

  CoreId mutated_successor(CoreId succ) const {
    if (su_->cfg.mutation == Mutation::WakeWrongSuccessor)
      return (succ + 1) % su_->cfg.n_cores;
    return succ;
  }

  /// Called when the core emits a request; maintains the node episode and
  /// appends the WakeUpRequest that accompanies an SCwait past the node.
  void qnode_on_send(SimState& st, CoreId c, const Message& m,
                     std::vector<Outgoing>& out) const {
    if (su_->cfg.adapter != AdapterKind::Colibri) return;
    QNode& n = st.qnodes[c];
    switch (m.kind) {
      case MsgKind::LrWaitReq:
      case MsgKind::MwaitReq:
        require(n.phase == QPhase::Idle,
                "core" + std::to_string(c) + " issued a wait with an episode in flight");
        n.start_episode(m.addr, m.kind == MsgKind::MwaitReq);
        trace_qnode(st, c);
        break;
      case MsgKind::ScWaitReq: {
        require(n.phase == QPhase::Holding && n.addr == m.addr,
                "SCwait does not match the node's episode");
        n.phase = QPhase::PastWait;
        if (n.has_successor) {
          Message wur{MsgKind::WakeUpRequest, n.addr};
          wur.successor = mutated_successor(n.successor);
          wur.requester = c;
          out.push_back({Endpoint::core(c), Endpoint::bank(su_->cfg.bank_of(n.addr)), wur});
          n.end_episode();
        }
        trace_qnode(st, c);
        break;
      }
      default:
        break;
    }
  }

  /// Returns false if the message was consumed by the node (SuccessorUpdate).
  bool qnode_on_deliver(SimState& st, CoreId c, const Message& m,
                        std::vector<Outgoing>& out) const {
    if (su_->cfg.adapter != AdapterKind::Colibri)
      return m.kind != MsgKind::SuccessorUpdate;
    QNode& n = st.qnodes[c];
    switch (m.kind) {
      case MsgKind::SuccessorUpdate: {
        if (n.phase == QPhase::Idle) {
          st.mon.protocol_flag(st.now, "SuccessorUpdate delivered to the idle node of core" +
                                           std::to_string(c));
          return false;
        }
        if (n.successor_seen) {
          st.mon.protocol_flag(st.now, "second SuccessorUpdate in one episode at core" +
                                           std::to_string(c));
          return false;
        }
        n.successor_seen = true;
        if (n.phase == QPhase::PastWait) {
          // Arrived after the SCwait passed the node: bounce as a wake-up.
          Message wur{MsgKind::WakeUpRequest, n.addr};
          wur.successor = mutated_successor(m.successor);
          wur.requester = c;
          out.push_back({Endpoint::core(c), Endpoint::bank(su_->cfg.bank_of(n.addr)), wur});
          n.end_episode();
        } else {
          n.has_successor = true;
          n.successor = m.successor;
        }
        trace_qnode(st, c);
        return false;
      }
      case MsgKind::LrWaitResp:
        if (n.phase == QPhase::Waiting) {
          n.phase = QPhase::Holding;
          trace_qnode(st, c);
        }
        return true;
      case MsgKind::MwaitResp:
        if (n.phase == QPhase::Waiting) {
          // The response itself dispatches the wake-up for the successor;
          // per-channel FIFO guarantees any SuccessorUpdate already arrived.
          if (n.has_successor) {
            Message wur{MsgKind::WakeUpRequest, n.addr};
            wur.successor = mutated_successor(n.successor);
            wur.requester = c;
            out.push_back(
                {Endpoint::core(c), Endpoint::bank(su_->cfg.bank_of(n.addr)), wur});
          }
          n.end_episode();
          trace_qnode(st, c);
        }
        return true;
      case MsgKind::ScWaitResp:
        if (n.phase == QPhase::PastWait) {
          n.end_episode();
          trace_qnode(st, c);
        }
        return true;
      case MsgKind::FailResp:
        if (n.phase == QPhase::Waiting) {
          n.end_episode();  // the controller enqueued nothing
          trace_qnode(st, c);
        }
        return true;
      default:
        return true;
    }
  }

  void core_deliver(SimState& st, const Event& ev, std::vector<Outgoing>& out) const {
    const CoreId c = ev.dst.id;
    if (ev.msg.kind != MsgKind::SuccessorUpdate)
      st.mon.on_response_delivered(st.now, c, ev.msg);
    if (!qnode_on_deliver(st, c, ev.msg, out)) return;
    core_trigger(st, c, detail::Trigger::Resp, &ev.msg, out);
  }

  // ---------------------------------------------------------------------
  // Core program interpreter
  // ---------------------------------------------------------------------

  void send_from_core(SimState& st, CoreId c, Message m, std::vector<Outgoing>& out) const {
    m.requester = c;
    CoreRt& cr = st.cores[c];
    require(cr.phase != CorePhase::Sleeping && cr.phase != CorePhase::AwaitingResponse,
            "core" + std::to_string(c) + " sent a message while waiting");
    st.mon.on_request_sent(st.now, c, m);
    qnode_on_send(st, c, m, out);
    cr.phase = (m.kind == MsgKind::LrWaitReq || m.kind == MsgKind::MwaitReq)
                   ? CorePhase::Sleeping
                   : CorePhase::AwaitingResponse;
    ++cr.msgs_sent;
    out.push_back({Endpoint::core(c), Endpoint::bank(su_->cfg.bank_of(m.addr)), m});
  }

  void resume_after(SimState& st, CoreId c, Cycle d) const {
    st.cores[c].phase = d > 0 ? CorePhase::BackingOff : CorePhase::Running;
    push_event(st, {st.now + d, st.next_seq++, EvKind::CoreResume, Endpoint::core(c),
                    Endpoint::core(c), {}});
  }

  void mark_done(SimState& st, CoreId c) const {
    CoreRt& cr = st.cores[c];
    cr.done = true;
    cr.phase = CorePhase::Done;
    cr.completion = st.now;
    if (!st.stats.snapshot_taken) {
      st.stats.snapshot_taken = true;
      st.stats.ops_at_first_done.resize(st.cores.size());
      for (std::size_t i = 0; i < st.cores.size(); ++i)
        st.stats.ops_at_first_done[i] = st.cores[i].ops;
    }
  }

  Word pick_bin(const CoreProgram& p, CoreId c, std::uint32_t iter) const {
    if (p.targets.size() == 1) return p.targets[0];
    if (p.random_bins)
      return p.targets[rng_pick(su_->cfg.seed, c, iter, p.targets.size())];
    return p.targets[(c + iter) % p.targets.size()];
  }

  void log_commit(SimState& st, CoreId c, Word addr, Word value) const {
    if (st.log_commits) st.cores[c].commit_log.emplace_back(addr, value);
  }

  void core_trigger(SimState& st, CoreId c, detail::Trigger trig, const Message* msg,
                    std::vector<Outgoing>& out) const {
    CoreRt& cr = st.cores[c];
    if (cr.done) return;  // stray wakeups are already flagged by the monitors
    if (trig == detail::Trigger::Resume && !cr.started) cr.started = true;
    cr.phase = CorePhase::Running;
    const CoreProgram& p = su_->programs[c];
    switch (p.kind) {
      case ProgramKind::Idle:
        mark_done(st, c);
        break;
      case ProgramKind::RmwLoop:
        fsm_rmw(st, c, trig, msg, out);
        break;
      case ProgramKind::LockedCs:
        fsm_locked(st, c, trig, msg, out);
        break;
      case ProgramKind::QueueOps:
        fsm_queue(st, c, trig, msg, out);
        break;
      case ProgramKind::WorkerStream:
        fsm_worker(st, c, trig, msg, out);
        break;
      case ProgramKind::DirectOps:
        fsm_direct(st, c, trig, msg, out);
        break;
    }
  }

  /// Retry bookkeeping shared by every conditional-store loop. Returns true
  /// if the program gave up (bounded-retry exploration scenarios).
  bool note_retry(SimState& st, CoreId c) const {
    CoreRt& cr = st.cores[c];
    ++cr.retries;
    ++cr.retries_this_op;
    const CoreProgram& p = su_->programs[c];
    if (p.retry_limit > 0 && cr.retries_this_op >= p.retry_limit) {
      cr.gave_up = true;
      mark_done(st, c);
      return true;
    }
    return false;
  }

  // -- RmwLoop --------------------------------------------------------------

  void fsm_rmw(SimState& st, CoreId c, detail::Trigger trig, const Message* msg,
               std::vector<Outgoing>& out) const {
    enum : std::uint16_t { kIssue = 0, kAwaitAmo, kAwaitLoad, kSendSc, kAwaitSc,
                           kAwaitGrant, kSendScWait, kAwaitScWait };
    CoreRt& cr = st.cores[c];
    const CoreProgram& p = su_->programs[c];
    const bool wait_flavor = p.flavor == Flavor::LrscWait || p.flavor == Flavor::Colibri;

    auto op_done = [&] {
      ++cr.ops;
      ++cr.iter;
      cr.retries_this_op = 0;
      cr.step = kIssue;
      if (cr.iter >= p.iterations)
        mark_done(st, c);
      else
        resume_after(st, c, p.loop_overhead);
    };

    switch (cr.step) {
      case kIssue: {
        if (trig != detail::Trigger::Resume) throw ModelError("rmw: unexpected trigger");
        cr.cur_addr = pick_bin(p, c, cr.iter);
        if (p.flavor == Flavor::AmoAdd) {
          cr.step = kAwaitAmo;
          send_from_core(st, c, {MsgKind::AmoAdd, cr.cur_addr, 1}, out);
        } else if (p.flavor == Flavor::LrSc) {
          cr.step = kAwaitLoad;
          send_from_core(st, c, {MsgKind::LrReq, cr.cur_addr}, out);
        } else {
          require(wait_flavor, "rmw-loop flavor must be an atomic flavor");
          cr.step = kAwaitGrant;
          send_from_core(st, c, {MsgKind::LrWaitReq, cr.cur_addr}, out);
        }
        break;
      }
      case kAwaitAmo:
        require(msg && msg->kind == MsgKind::AmoResp, "rmw: expected AmoResp");
        log_commit(st, c, cr.cur_addr, msg->value + 1);
        op_done();
        break;
      case kAwaitLoad:
        require(msg && msg->kind == MsgKind::LoadResp, "rmw: expected LoadResp");
        cr.reg = msg->value;
        cr.step = kSendSc;
        resume_after(st, c, p.compute_cycles);
        break;
      case kSendSc:
        cr.step = kAwaitSc;
        send_from_core(st, c, {MsgKind::ScReq, cr.cur_addr, cr.reg + 1}, out);
        break;
      case kAwaitSc:
        require(msg && msg->kind == MsgKind::ScWaitResp, "rmw: expected SC response");
        if (msg->value == 0) {
          log_commit(st, c, cr.cur_addr, cr.reg + 1);
          op_done();
        } else if (!note_retry(st, c)) {
          cr.step = kIssue;
          resume_after(st, c, su_->cfg.backoff_cycles);
        }
        break;
      case kAwaitGrant:
        if (msg && msg->kind == MsgKind::FailResp) {
          if (!note_retry(st, c)) {
            cr.step = kIssue;
            resume_after(st, c, su_->cfg.fail_retry_cycles);
          }
          break;
        }
        require(msg && msg->kind == MsgKind::LrWaitResp, "rmw: expected LrWaitResp");
        cr.reg = msg->value;
        cr.step = kSendScWait;
        resume_after(st, c, p.compute_cycles);
        break;
      case kSendScWait:
        cr.step = kAwaitScWait;
        send_from_core(st, c, {MsgKind::ScWaitReq, cr.cur_addr, cr.reg + 1}, out);
        break;
      case kAwaitScWait:
        require(msg && msg->kind == MsgKind::ScWaitResp, "rmw: expected SCwait response");
        if (msg->value == 0) {
          log_commit(st, c, cr.cur_addr, cr.reg + 1);
          op_done();
        } else if (!note_retry(st, c)) {
          cr.step = kIssue;  // a fresh LRwait; the failed pair yielded the queue
          resume_after(st, c, su_->cfg.backoff_cycles);
        }
        break;
      default:
        throw ModelError("rmw: bad step");
    }
  }

  // -- LockedCs -------------------------------------------------------------

  void fsm_locked(SimState& st, CoreId c, detail::Trigger trig, const Message* msg,
                  std::vector<Outgoing>& out) const {
    enum : std::uint16_t {
      kIssue = 0,
      // ticket lock
      kTicketResp, kTicketPoll, kTicketPollResp,
      // spin locks (lrsc / colibri)
      kSpinLoadResp, kSpinScSend, kSpinScResp, kSpinWriteBackSend, kSpinWriteBackResp,
      // mcs
      kMcsNextInit, kMcsFlagInit, kMcsSwapResp, kMcsSwapSend, kMcsScResp,
      kMcsLinkAck, kMcsWaitResp,
      // critical section
      kCsLoadResp, kCsStoreSend, kCsStoreAck,
      // release paths
      kRelTicketResp, kRelStoreAck,
      kRelNextResp, kRelSwapResp, kRelSwapSend, kRelScResp, kRelRestoreSend,
      kRelRestoreResp, kRelMwaitResp, kRelFlagAck,
    };
    CoreRt& cr = st.cores[c];
    const CoreProgram& p = su_->programs[c];

    const Word bin_count = p.targets.size();
    auto lock_word = [&](Word j) { return p.lock_base + 2 * j; };
    auto lock_word2 = [&](Word j) { return p.lock_base + 2 * j + 1; };
    auto mcs_next = [&](CoreId core) { return p.mcs_node_base + 2 * core; };
    auto mcs_flag = [&](CoreId core) { return p.mcs_node_base + 2 * core + 1; };

    // cr.aux holds the lock index; cr.reg scratch values.
    const Word j = cr.aux;

    auto enter_cs = [&] {
      st.mon.on_cs_enter(st.now, lock_word(j), c);
      cr.cur_addr = p.targets[j];
      cr.step = kCsLoadResp;
      send_from_core(st, c, {MsgKind::Load, cr.cur_addr}, out);
    };
    auto released = [&] {
      ++cr.ops;
      ++cr.iter;
      cr.retries_this_op = 0;
      cr.step = kIssue;
      if (cr.iter >= p.iterations)
        mark_done(st, c);
      else
        resume_after(st, c, p.loop_overhead);
    };

    switch (cr.step) {
      case kIssue: {
        if (trig != detail::Trigger::Resume) throw ModelError("lock: unexpected trigger");
        cr.aux = bin_count <= 1 ? 0
                                : (p.random_bins
                                       ? rng_pick(su_->cfg.seed, c, cr.iter, bin_count)
                                       : (c + cr.iter) % bin_count);
        const Word lj = cr.aux;
        switch (p.flavor) {
          case Flavor::SpinLockAmo:
            cr.step = kTicketResp;
            send_from_core(st, c, {MsgKind::AmoAdd, lock_word(lj), 1}, out);
            break;
          case Flavor::SpinLockLrSc:
            cr.step = kSpinLoadResp;
            send_from_core(st, c, {MsgKind::LrReq, lock_word(lj)}, out);
            break;
          case Flavor::SpinLockColibri:
            cr.step = kSpinLoadResp;
            send_from_core(st, c, {MsgKind::LrWaitReq, lock_word(lj)}, out);
            break;
          case Flavor::McsMwaitLock:
            cr.step = kMcsNextInit;
            send_from_core(st, c, {MsgKind::Store, mcs_next(c), 0}, out);
            break;
          default:
            throw ModelError("locked-cs needs a lock flavor");
        }
        break;
      }

      // -- ticket lock -----------------------------------------------------
      case kTicketResp:
        cr.reg = msg->value;  // my ticket
        cr.step = kTicketPollResp;
        send_from_core(st, c, {MsgKind::Load, lock_word2(j)}, out);
        break;
      case kTicketPoll:
        cr.step = kTicketPollResp;
        send_from_core(st, c, {MsgKind::Load, lock_word2(j)}, out);
        break;
      case kTicketPollResp:
        if (msg->value == cr.reg) {
          enter_cs();
        } else {
          ++cr.retries;
          cr.step = kTicketPoll;
          resume_after(st, c, su_->cfg.backoff_cycles);
        }
        break;

      // -- LR/SC and LRwait spin locks --------------------------------------
      case kSpinLoadResp:
        if (p.flavor == Flavor::SpinLockColibri && msg->kind == MsgKind::FailResp) {
          ++cr.retries;
          cr.step = kIssue;
          resume_after(st, c, su_->cfg.fail_retry_cycles);
          break;
        }
        cr.reg = msg->value;
        if (cr.reg == 0) {
          cr.step = kSpinScSend;
          resume_after(st, c, p.compute_cycles);
        } else if (p.flavor == Flavor::SpinLockColibri) {
          // The wait pair must be closed even when the lock is taken:
          // write the observed value back, then back off and retry.
          cr.step = kSpinWriteBackSend;
          resume_after(st, c, p.compute_cycles);
        } else {
          ++cr.retries;
          cr.step = kIssue;
          resume_after(st, c, su_->cfg.backoff_cycles);
        }
        break;
      case kSpinScSend:
        cr.step = kSpinScResp;
        send_from_core(st, c,
                       {p.flavor == Flavor::SpinLockColibri ? MsgKind::ScWaitReq
                                                            : MsgKind::ScReq,
                        lock_word(j), 1},
                       out);
        break;
      case kSpinScResp:
        if (msg->value == 0) {
          enter_cs();
        } else if (!note_retry(st, c)) {
          cr.step = kIssue;
          resume_after(st, c, su_->cfg.backoff_cycles);
        }
        break;
      case kSpinWriteBackSend:
        cr.step = kSpinWriteBackResp;
        send_from_core(st, c, {MsgKind::ScWaitReq, lock_word(j), cr.reg}, out);
        break;
      case kSpinWriteBackResp:
        ++cr.retries;
        cr.step = kIssue;
        resume_after(st, c, su_->cfg.backoff_cycles);
        break;

      // -- MCS lock with Mwait ----------------------------------------------
      case kMcsNextInit:
        cr.step = kMcsFlagInit;
        send_from_core(st, c, {MsgKind::Store, mcs_flag(c), 0}, out);
        break;
      case kMcsFlagInit:
        cr.step = kMcsSwapResp;
        send_from_core(st, c, {MsgKind::LrWaitReq, lock_word(j)}, out);
        break;
      case kMcsSwapResp:
        cr.reg = msg->value;  // predecessor node id (0 = none)
        cr.step = kMcsSwapSend;
        resume_after(st, c, p.compute_cycles);
        break;
      case kMcsSwapSend:
        cr.step = kMcsScResp;
        send_from_core(st, c, {MsgKind::ScWaitReq, lock_word(j), c + 1}, out);
        break;
      case kMcsScResp:
        if (msg->value != 0) {
          if (!note_retry(st, c)) {
            cr.step = kMcsFlagInit;  // retry the swap
            resume_after(st, c, su_->cfg.backoff_cycles);
          }
          break;
        }
        if (cr.reg == 0) {
          enter_cs();
        } else {
          cr.step = kMcsLinkAck;
          send_from_core(
              st, c, {MsgKind::Store, mcs_next(static_cast<CoreId>(cr.reg - 1)), c + 1},
              out);
        }
        break;
      case kMcsLinkAck:
        cr.step = kMcsWaitResp;
        send_from_core(st, c, {MsgKind::MwaitReq, mcs_flag(c), 0, kNoCore, 0}, out);
        break;
      case kMcsWaitResp:
        enter_cs();  // a non-zero flag write woke us
        break;

      // -- critical section --------------------------------------------------
      case kCsLoadResp:
        cr.reg = msg->value;
        cr.step = kCsStoreSend;
        resume_after(st, c, p.cs_length);
        break;
      case kCsStoreSend:
        cr.step = kCsStoreAck;
        send_from_core(st, c, {MsgKind::Store, cr.cur_addr, cr.reg + 1}, out);
        break;
      case kCsStoreAck: {
        log_commit(st, c, cr.cur_addr, cr.reg + 1);
        switch (p.flavor) {
          case Flavor::SpinLockAmo:
            cr.step = kRelTicketResp;
            send_from_core(st, c, {MsgKind::AmoAdd, lock_word2(j), 1}, out);
            break;
          case Flavor::SpinLockLrSc:
          case Flavor::SpinLockColibri:
            cr.step = kRelStoreAck;
            send_from_core(st, c, {MsgKind::Store, lock_word(j), 0}, out);
            break;
          case Flavor::McsMwaitLock:
            cr.step = kRelNextResp;
            send_from_core(st, c, {MsgKind::Load, mcs_next(c)}, out);
            break;
          default:
            throw ModelError("locked-cs needs a lock flavor");
        }
        break;
      }

      // -- releases ----------------------------------------------------------
      case kRelTicketResp:
      case kRelStoreAck:
        st.mon.on_cs_exit(st.now, lock_word(j), c);
        released();
        break;
      case kRelNextResp:
        if (msg->value != 0) {
          cr.reg = msg->value;  // successor node id
          cr.step = kRelFlagAck;
          send_from_core(
              st, c, {MsgKind::Store, mcs_flag(static_cast<CoreId>(cr.reg - 1)), 1}, out);
        } else {
          cr.step = kRelSwapResp;
          send_from_core(st, c, {MsgKind::LrWaitReq, lock_word(j)}, out);
        }
        break;
      case kRelSwapResp:
        cr.reg = msg->value;
        cr.step = kRelSwapSend;
        resume_after(st, c, p.compute_cycles);
        break;
      case kRelSwapSend:
        if (cr.reg == c + 1) {
          cr.step = kRelScResp;
          send_from_core(st, c, {MsgKind::ScWaitReq, lock_word(j), 0}, out);
        } else {
          cr.step = kRelRestoreResp;
          send_from_core(st, c, {MsgKind::ScWaitReq, lock_word(j), cr.reg}, out);
        }
        break;
      case kRelScResp:
        if (msg->value == 0) {
          st.mon.on_cs_exit(st.now, lock_word(j), c);
          released();
        } else if (!note_retry(st, c)) {
          cr.step = kRelNextResp;
          send_from_core(st, c, {MsgKind::Load, mcs_next(c)}, out);
        }
        break;
      case kRelRestoreResp:
        cr.step = kRelMwaitResp;
        send_from_core(st, c, {MsgKind::MwaitReq, mcs_next(c), 0, kNoCore, 0}, out);
        break;
      case kRelMwaitResp:
        cr.reg = msg->value;  // successor node id just linked
        cr.step = kRelFlagAck;
        send_from_core(st, c,
                       {MsgKind::Store, mcs_flag(static_cast<CoreId>(cr.reg - 1)), 1}, out);
        break;
      case kRelFlagAck:
        st.mon.on_cs_exit(st.now, lock_word(j), c);
        released();
        break;

      default:
        throw ModelError("lock: bad step");
    }
  }

  // -- QueueOps ---------------------------------------------------------------

  void fsm_queue(SimState& st, CoreId c, detail::Trigger trig, const Message* msg,
                 std::vector<Outgoing>& out) const {
    enum : std::uint16_t {
      kIssue = 0,
      // push
      kPushIdxResp, kPushIdxSc, kPushIdxScResp, kPushSlotAck,
      // lock-based push
      kPushLockTicket, kPushLockPoll, kPushLockPollResp, kPushLockTailResp,
      kPushLockTailAck, kPushLockSlotAck, kPushLockRelResp,
      // pop
      kPopIdxResp, kPopTailResp, kPopIdxSc, kPopIdxScResp, kPopEmptyWbResp,
      kPopSlotResp, kPopSlotRetry, kPopMwaitResp,
      // lock-based pop
      kPopLockTicket, kPopLockPoll, kPopLockPollResp, kPopLockHeadResp,
      kPopLockTailResp2, kPopLockHeadAck, kPopLockRelResp, kPopLockRelEmptyResp,
    };
    CoreRt& cr = st.cores[c];
    const CoreProgram& p = su_->programs[c];
    const bool wait_flavor = p.flavor == Flavor::LrscWait || p.flavor == Flavor::Colibri;
    const bool lock_flavor = p.flavor == Flavor::SpinLockAmo;
    auto slot_addr = [&](Word i) { return p.queue_slot_base + i; };
    // cr.iter counts sub-ops: alternating push/pop (PushPopLoop) or the
    // first `iterations` sub-ops are pushes (PushAllThenPopAll).
    auto is_push_subop = [&] {
      if (p.queue_mode == QueueMode::PushPopLoop) return cr.iter % 2 == 0;
      return cr.iter < p.iterations;
    };
    auto pushed_value_seq = [&] {
      const Word n = p.queue_mode == QueueMode::PushPopLoop ? cr.iter / 2 : cr.iter;
      return static_cast<Word>(c) * p.iterations + n + 1;
    };
    auto subop_done = [&] {
      ++cr.ops;
      ++cr.iter;
      cr.retries_this_op = 0;
      cr.step = kIssue;
      if (cr.iter >= 2ull * p.iterations)
        mark_done(st, c);
      else
        resume_after(st, c, p.loop_overhead);
    };

    switch (cr.step) {
      case kIssue: {
        if (trig != detail::Trigger::Resume) throw ModelError("queue: unexpected trigger");
        if (is_push_subop()) {
          if (lock_flavor) {
            cr.step = kPushLockTicket;
            send_from_core(st, c, {MsgKind::AmoAdd, p.lock_base, 1}, out);
          } else {
            cr.step = kPushIdxResp;
            send_from_core(st, c,
                           {wait_flavor ? MsgKind::LrWaitReq : MsgKind::LrReq, p.queue_tail},
                           out);
          }
        } else {
          if (lock_flavor) {
            cr.step = kPopLockTicket;
            send_from_core(st, c, {MsgKind::AmoAdd, p.lock_base, 1}, out);
          } else {
            cr.step = kPopIdxResp;
            send_from_core(st, c,
                           {wait_flavor ? MsgKind::LrWaitReq : MsgKind::LrReq, p.queue_head},
                           out);
          }
        }
        break;
      }

      // -- push (index RMW) --------------------------------------------------
      case kPushIdxResp:
        cr.aux = msg->value;  // ticket = old tail
        cr.step = kPushIdxSc;
        resume_after(st, c, p.compute_cycles);
        break;
      case kPushIdxSc:
        cr.step = kPushIdxScResp;
        send_from_core(st, c,
                       {wait_flavor ? MsgKind::ScWaitReq : MsgKind::ScReq, p.queue_tail,
                        cr.aux + 1},
                       out);
        break;
      case kPushIdxScResp:
        if (msg->value == 0) {
          cr.step = kPushSlotAck;
          send_from_core(st, c, {MsgKind::Store, slot_addr(cr.aux), pushed_value_seq()},
                         out);
        } else if (!note_retry(st, c)) {
          cr.step = kIssue;
          resume_after(st, c, su_->cfg.backoff_cycles);
        }
        break;
      case kPushSlotAck:
        subop_done();
        break;

      // -- push (ticket-lock protected) --------------------------------------
      case kPushLockTicket:
        cr.reg = msg->value;
        cr.step = kPushLockPollResp;
        send_from_core(st, c, {MsgKind::Load, p.lock_base + 1}, out);
        break;
      case kPushLockPoll:
        cr.step = kPushLockPollResp;
        send_from_core(st, c, {MsgKind::Load, p.lock_base + 1}, out);
        break;
      case kPushLockPollResp:
        if (msg->value == cr.reg) {
          st.mon.on_cs_enter(st.now, p.lock_base, c);
          cr.step = kPushLockTailResp;
          send_from_core(st, c, {MsgKind::Load, p.queue_tail}, out);
        } else {
          ++cr.retries;
          cr.step = kPushLockPoll;
          resume_after(st, c, su_->cfg.backoff_cycles);
        }
        break;
      case kPushLockTailResp:
        cr.aux = msg->value;
        cr.step = kPushLockTailAck;
        send_from_core(st, c, {MsgKind::Store, p.queue_tail, cr.aux + 1}, out);
        break;
      case kPushLockTailAck:
        cr.step = kPushLockSlotAck;
        send_from_core(st, c, {MsgKind::Store, slot_addr(cr.aux), pushed_value_seq()},
                       out);
        break;
      case kPushLockSlotAck:
        st.mon.on_cs_exit(st.now, p.lock_base, c);
        cr.step = kPushLockRelResp;
        send_from_core(st, c, {MsgKind::AmoAdd, p.lock_base + 1, 1}, out);
        break;
      case kPushLockRelResp:
        subop_done();
        break;

      // -- pop (index RMW) ----------------------------------------------------
      case kPopIdxResp:
        if (msg->kind == MsgKind::FailResp) {
          ++cr.retries;
          cr.step = kIssue;
          resume_after(st, c, su_->cfg.fail_retry_cycles);
          break;
        }
        cr.aux = msg->value;  // head ticket candidate
        cr.step = kPopTailResp;
        send_from_core(st, c, {MsgKind::Load, p.queue_tail}, out);
        break;
      case kPopTailResp:
        if (cr.aux >= msg->value) {
          // Empty: leave the head untouched. The wait flavors must still
          // close the pair with a value-preserving SCwait.
          ++cr.empty_pops;
          if (wait_flavor) {
            cr.step = kPopEmptyWbResp;
            send_from_core(st, c, {MsgKind::ScWaitReq, p.queue_head, cr.aux}, out);
          } else {
            cr.step = kIssue;
            resume_after(st, c, su_->cfg.backoff_cycles);
          }
        } else {
          cr.step = kPopIdxSc;
          resume_after(st, c, p.compute_cycles);
        }
        break;
      case kPopEmptyWbResp:
        cr.step = kIssue;
        resume_after(st, c, su_->cfg.backoff_cycles);
        break;
      case kPopIdxSc:
        cr.step = kPopIdxScResp;
        send_from_core(st, c,
                       {wait_flavor ? MsgKind::ScWaitReq : MsgKind::ScReq, p.queue_head,
                        cr.aux + 1},
                       out);
        break;
      case kPopIdxScResp:
        if (msg->value == 0) {
          if (wait_flavor) {
            cr.step = kPopMwaitResp;
            send_from_core(st, c, {MsgKind::MwaitReq, slot_addr(cr.aux), 0, kNoCore, 0},
                           out);
          } else {
            cr.step = kPopSlotResp;
            send_from_core(st, c, {MsgKind::Load, slot_addr(cr.aux)}, out);
          }
        } else if (!note_retry(st, c)) {
          cr.step = kIssue;
          resume_after(st, c, su_->cfg.backoff_cycles);
        }
        break;
      case kPopSlotResp:
        if (msg->value == 0) {
          // The publishing store has not landed yet; poll.
          ++cr.retries;
          cr.step = kPopSlotRetry;
          resume_after(st, c, su_->cfg.backoff_cycles);
          break;
        }
        cr.popped.push_back(msg->value);
        subop_done();
        break;
      case kPopSlotRetry:
        cr.step = kPopSlotResp;
        send_from_core(st, c, {MsgKind::Load, slot_addr(cr.aux)}, out);
        break;
      case kPopMwaitResp:
        cr.popped.push_back(msg->value);
        subop_done();
        break;

      // -- pop (ticket-lock protected) ----------------------------------------
      case kPopLockTicket:
        cr.reg = msg->value;
        cr.step = kPopLockPollResp;
        send_from_core(st, c, {MsgKind::Load, p.lock_base + 1}, out);
        break;
      case kPopLockPoll:
        cr.step = kPopLockPollResp;
        send_from_core(st, c, {MsgKind::Load, p.lock_base + 1}, out);
        break;
      case kPopLockPollResp:
        if (msg->value == cr.reg) {
          st.mon.on_cs_enter(st.now, p.lock_base, c);
          cr.step = kPopLockHeadResp;
          send_from_core(st, c, {MsgKind::Load, p.queue_head}, out);
        } else {
          ++cr.retries;
          cr.step = kPopLockPoll;
          resume_after(st, c, su_->cfg.backoff_cycles);
        }
        break;
      case kPopLockHeadResp:
        cr.aux = msg->value;
        cr.step = kPopLockTailResp2;
        send_from_core(st, c, {MsgKind::Load, p.queue_tail}, out);
        break;
      case kPopLockTailResp2:
        if (cr.aux >= msg->value) {
          ++cr.empty_pops;
          st.mon.on_cs_exit(st.now, p.lock_base, c);
          cr.step = kPopLockRelEmptyResp;
          send_from_core(st, c, {MsgKind::AmoAdd, p.lock_base + 1, 1}, out);
        } else {
          cr.step = kPopLockHeadAck;
          send_from_core(st, c, {MsgKind::Store, p.queue_head, cr.aux + 1}, out);
        }
        break;
      case kPopLockRelEmptyResp:
        cr.step = kIssue;
        resume_after(st, c, su_->cfg.backoff_cycles);
        break;
      case kPopLockHeadAck:
        st.mon.on_cs_exit(st.now, p.lock_base, c);
        cr.step = kPopLockRelResp;
        send_from_core(st, c, {MsgKind::AmoAdd, p.lock_base + 1, 1}, out);
        break;
      case kPopLockRelResp:
        cr.step = kPopSlotResp;
        send_from_core(st, c, {MsgKind::Load, slot_addr(cr.aux)}, out);
        break;

      default:
        throw ModelError("queue: bad step");
    }
  }

  // -- WorkerStream -----------------------------------------------------------

  void fsm_worker(SimState& st, CoreId c, detail::Trigger trig, const Message* msg,
                  std::vector<Outgoing>& out) const {
    enum : std::uint16_t { kIssue = 0, kAwait };
    CoreRt& cr = st.cores[c];
    const CoreProgram& p = su_->programs[c];
    switch (cr.step) {
      case kIssue: {
        (void)trig;
        if (cr.op_index >= p.stream_length) {
          mark_done(st, c);
          break;
        }
        const Word addr =
            p.region_base + (p.region_offset + cr.op_index) % p.region_words;
        cr.step = kAwait;
        if (cr.op_index % 2 == 0)
          send_from_core(st, c, {MsgKind::Load, addr}, out);
        else
          send_from_core(st, c, {MsgKind::Store, addr, cr.op_index}, out);
        break;
      }
      case kAwait:
        (void)msg;
        ++cr.op_index;
        ++cr.ops;
        cr.step = kIssue;
        resume_after(st, c, p.stream_gap);
        break;
      default:
        throw ModelError("worker: bad step");
    }
  }

  // -- DirectOps ---------------------------------------------------------------

  void fsm_direct(SimState& st, CoreId c, detail::Trigger trig, const Message* msg,
                  std::vector<Outgoing>& out) const {
    enum : std::uint16_t { kNext = 0, kDelayed, kAwait };
    CoreRt& cr = st.cores[c];
    const CoreProgram& p = su_->programs[c];
    switch (cr.step) {
      case kNext: {
        (void)trig;
        if (cr.op_index >= p.ops.size()) {
          mark_done(st, c);
          break;
        }
        const DirectOp& op = p.ops[cr.op_index];
        if (op.delay_before > 0) {
          cr.step = kDelayed;
          resume_after(st, c, op.delay_before);
          break;
        }
        [[fallthrough]];
      }
      case kDelayed: {
        const DirectOp& op = p.ops[cr.op_index];
        Message m{op.kind, op.addr, op.value};
        m.expected = op.expected;
        cr.cur_addr = op.addr;
        cr.step = kAwait;
        send_from_core(st, c, m, out);
        break;
      }
      case kAwait: {
        require(msg != nullptr, "direct: expected a response");
        const DirectOp& op = p.ops[cr.op_index];
        cr.reg = msg->value;
        if (op.kind == MsgKind::ScWaitReq && msg->kind == MsgKind::ScWaitResp &&
            msg->value == 0) {
          log_commit(st, c, op.addr, op.value);
          ++cr.ops;
        } else if (op.kind == MsgKind::Store || op.kind == MsgKind::AmoAdd) {
          ++cr.ops;
        } else if (msg->kind == MsgKind::LrWaitResp || msg->kind == MsgKind::MwaitResp ||
                   msg->kind == MsgKind::LoadResp) {
          ++cr.ops;
        }
        ++cr.op_index;
        cr.step = kNext;
        resume_after(st, c, 0);
        break;
      }
      default:
        throw ModelError("direct: bad step");
    }
  }
};

// ---------------------------------------------------------------------------
// Simulation: the normal (fixed-latency) runner
// ---------------------------------------------------------------------------

inline constexpr Cycle kDefaultBudget = 200'000'000;

class Simulation {
 public:
  explicit Simulation(RunSetup setup)
      : su_(std::move(setup)), kernel_(su_) {
    su_.validate();
    kernel_.init_state(st_);
  }

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void set_trace(ITraceSink* sink) { kernel_.sink = sink; }
  void set_log_commits(bool on) { st_.log_commits = on; }

  /// Runs to quiescence. With `strict` (the default), any monitor violation
  /// is a model bug and throws; the verifier drives the Kernel directly and
  /// turns violations into verdicts instead.
  RunOutcome run(Cycle max_cycles = kDefaultBudget, bool strict = true) {
    outcome_ = kernel_.run_to_quiescence(st_, max_cycles);
    kernel_.emit_summary(st_);
    if (outcome_ != RunOutcome::BudgetExhausted)
      require(st_.stats.deliveries_scheduled == st_.stats.deliveries_done,
              "event loss: not every scheduled message was delivered");
    if (strict && !st_.mon.clean())
      throw ModelError("monitor violation: " + st_.mon.violations.front().detail);
    return outcome_;
  }

  /// Direct access to the raw scheduling contract (tests).
  void schedule(Event ev) { kernel_.schedule(st_, ev); }

  RunOutcome outcome() const { return outcome_; }
  Cycle now() const { return st_.now; }
  const SimState& state() const { return st_; }
  SimState& state() { return st_; }
  const Stats& stats() const { return st_.stats; }
  const RunSetup& setup() const { return su_; }
  Word mem(Word addr) const { return kernel_.read_word(st_, addr); }

 private:
  RunSetup su_;
  Kernel kernel_;
  SimState st_;
  RunOutcome outcome_ = RunOutcome::Completed;
};

}  // namespace colibrisim
