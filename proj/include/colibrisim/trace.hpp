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

#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "colibrisim/core_types.hpp"

namespace colibrisim {

// Trace format: one event per line, stable field order:
//   <cycle> <source> <destination> <kind> [k=v ...]
// Message deliveries use the message kind; protocol-state lines (QNodePhase,
// SlotState) and run summaries (MemWord, CoreDone) use src == dst. Lines
// starting with '#' are header/comment lines.

struct TraceLine {
  Cycle cycle = 0;
  Endpoint src;
  Endpoint dst;
  std::string kind;
  std::vector<std::pair<std::string, std::string>> fields;

  std::string format() const {
    std::ostringstream os;
    os << cycle << ' ' << to_string(src) << ' ' << to_string(dst) << ' ' << kind;
    for (const auto& [k, v] : fields) os << ' ' << k << '=' << v;
    return os.str();
  }

  std::optional<std::string> field(const std::string& name) const {
    for (const auto& [k, v] : fields)
      if (k == name) return v;
    return std::nullopt;
  }

  Word field_u64(const std::string& name) const {
    auto v = field(name);
    if (!v) throw ConfigError("trace line missing field '" + name + "': " + format());
    return std::stoull(*v);
  }
};

inline TraceLine parse_trace_line(const std::string& line) {
  std::istringstream is(line);
  TraceLine t;
  std::string src, dst;
  if (!(is >> t.cycle >> src >> dst >> t.kind))
    throw ConfigError("malformed trace line: " + line);
  if (!parse_endpoint(src, t.src) || !parse_endpoint(dst, t.dst))
    throw ConfigError("malformed trace endpoint: " + line);
  std::string kv;
  while (is >> kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed trace field: " + line);
    t.fields.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return t;
}

/// Builds the canonical trace line for a delivered message.
inline TraceLine message_line(Cycle cycle, const Endpoint& src, const Endpoint& dst,
                              const Message& m) {
  TraceLine t;
  t.cycle = cycle;
  t.src = src;
  t.dst = dst;
  t.kind = to_string(m.kind);
  auto add = [&](const char* k, Word v) { t.fields.emplace_back(k, std::to_string(v)); };
  switch (m.kind) {
    case MsgKind::Load:
    case MsgKind::LrReq:
      add("addr", m.addr);
      break;
    case MsgKind::Store:
    case MsgKind::AmoAdd:
    case MsgKind::ScReq:
    case MsgKind::ScWaitReq:
      add("addr", m.addr);
      add("value", m.value);
      break;
    case MsgKind::LrWaitReq:
      add("addr", m.addr);
      break;
    case MsgKind::MwaitReq:
      add("addr", m.addr);
      add("expected", m.expected);
      break;
    case MsgKind::LoadResp:
    case MsgKind::AmoResp:
    case MsgKind::LrWaitResp:
    case MsgKind::MwaitResp:
      add("addr", m.addr);
      add("value", m.value);
      break;
    case MsgKind::ScWaitResp:
      add("addr", m.addr);
      add("code", m.value);
      break;
    case MsgKind::StoreAck:
      add("addr", m.addr);
      break;
    case MsgKind::SuccessorUpdate:
      add("addr", m.addr);
      add("succ", m.successor);
      break;
    case MsgKind::WakeUpRequest:
      add("addr", m.addr);
      add("succ", m.successor);
      break;
    case MsgKind::FailResp:
      add("addr", m.addr);
      add("code", m.value);
      break;
  }
  return t;
}

/// Reconstructs the message of a delivery line (for replay).
inline Message message_of_line(const TraceLine& t) {
  Message m;
  if (!parse_msg_kind(t.kind, m.kind))
    throw ConfigError("not a message line: " + t.format());
  if (auto v = t.field("addr")) m.addr = std::stoull(*v);
  if (auto v = t.field("value")) m.value = std::stoull(*v);
  if (auto v = t.field("code")) m.value = std::stoull(*v);
  if (auto v = t.field("expected")) m.expected = std::stoull(*v);
  if (auto v = t.field("succ")) m.successor = static_cast<CoreId>(std::stoull(*v));
  if (t.src.kind == EndpointKind::Core && is_core_request(m.kind))
    m.requester = t.src.id;
  return m;
}

class ITraceSink {
 public:
  virtual ~ITraceSink() = default;
  virtual void line(const TraceLine& t) = 0;
  virtual void comment(const std::string& text) = 0;
};

class VectorTraceSink final : public ITraceSink {
 public:
  void line(const TraceLine& t) override { lines_.push_back(t.format()); }
  void comment(const std::string& text) override { lines_.push_back("# " + text); }
  const std::vector<std::string>& lines() const { return lines_; }

 private:
  std::vector<std::string> lines_;
};

class StreamTraceSink final : public ITraceSink {
 public:
  explicit StreamTraceSink(std::ostream& os) : os_(os) {}
  void line(const TraceLine& t) override { os_ << t.format() << '\n'; }
  void comment(const std::string& text) override { os_ << "# " << text << '\n'; }

 private:
  std::ostream& os_;
};

}  // namespace colibrisim
