#include "sdpf/lattice.hpp"

#include <sstream>
#include <tuple>

namespace sdpf {

std::int64_t RidKeyedSum::total() const {
  std::int64_t sum = 0;
  for (const auto& [rid, v] : entries) sum += v;
  return sum;
}

TileCell TileCell::present(std::string payload, Rid rid) {
  TileCell c;
  c.state = State::Present;
  c.payload = std::move(payload);
  c.rid = rid;
  return c;
}

TileCell TileCell::tombstone(Rid rid, std::optional<TileId> forward) {
  TileCell c;
  c.state = State::Tombstone;
  c.rid = rid;
  c.forward = forward;
  return c;
}

TileCell join(const TileCell& a, const TileCell& b) {
  if (a.state != b.state) {
    return a.state == TileCell::State::Tombstone ? a : b;
  }
  if (a.state == TileCell::State::Present) {
    return std::tie(a.rid, a.payload) < std::tie(b.rid, b.payload) ? b : a;
  }
  return std::tie(a.rid, a.forward) < std::tie(b.rid, b.forward) ? b : a;
}

const char* variant_name(const JoinValue& v) {
  switch (v.index()) {
    case 0: return "MaxRegister";
    case 1: return "GrowSet";
    case 2: return "RidKeyedSum";
    default: return "TileStore";
  }
}

namespace {

void require_same_variant(const JoinValue& a, const JoinValue& b) {
  if (a.index() != b.index()) {
    throw VariantMismatchError(std::string("join across variants: ") +
                               variant_name(a) + " vs " + variant_name(b));
  }
}

}  // namespace

JoinValue join(const JoinValue& a, const JoinValue& b) {
  require_same_variant(a, b);
  if (const auto* ma = std::get_if<MaxRegister>(&a)) {
    const auto& mb = std::get<MaxRegister>(b);
    return MaxRegister{ma->value >= mb.value ? ma->value : mb.value};
  }
  if (const auto* sa = std::get_if<GrowSet>(&a)) {
    GrowSet out = *sa;
    const auto& sb = std::get<GrowSet>(b);
    out.elements.insert(sb.elements.begin(), sb.elements.end());
    return out;
  }
  if (const auto* ra = std::get_if<RidKeyedSum>(&a)) {
    RidKeyedSum out = *ra;
    const auto& rb = std::get<RidKeyedSum>(b);
    for (const auto& [rid, v] : rb.entries) {
      // Equal rids carry the same contribution by construction; per-rid max
      // keeps the join lawful even for adversarial inputs.
      auto [it, inserted] = out.entries.emplace(rid, v);
      if (!inserted && v > it->second) it->second = v;
    }
    return out;
  }
  const auto& ta = std::get<TileStore>(a);
  const auto& tb = std::get<TileStore>(b);
  TileStore out = ta;
  for (const auto& [id, cell] : tb.entries) {
    auto [it, inserted] = out.entries.emplace(id, cell);
    if (!inserted) it->second = join(it->second, cell);
  }
  return out;
}

bool leq(const JoinValue& a, const JoinValue& b) {
  require_same_variant(a, b);
  return join(a, b) == b;
}

JoinValue join_all(const std::vector<JoinValue>& items) {
  if (items.empty()) {
    throw EmptyJoinError("join_all over an empty multiset");
  }
  JoinValue acc = items.front();
  for (std::size_t i = 1; i < items.size(); ++i) acc = join(acc, items[i]);
  return acc;
}

namespace {

std::string bytes_to_hex(const std::string& s) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(s.size() * 2);
  for (unsigned char c : s) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xf]);
  }
  return out;
}

}  // namespace

std::string canonical_text(const TileCell& c) {
  if (c.state == TileCell::State::Present) {
    return "P(" + to_hex(c.rid) + "," + bytes_to_hex(c.payload) + ")";
  }
  std::string out = "T(" + to_hex(c.rid);
  if (c.forward) out += "->" + to_hex(*c.forward);
  return out + ")";
}

std::string canonical_text(const JoinValue& v) {
  std::ostringstream out;
  if (const auto* m = std::get_if<MaxRegister>(&v)) {
    out << "max(" << m->value << ")";
  } else if (const auto* s = std::get_if<GrowSet>(&v)) {
    out << "set{";
    bool first = true;
    for (const auto& e : s->elements) {
      if (!first) out << ",";
      first = false;
      out << bytes_to_hex(e);
    }
    out << "}";
  } else if (const auto* r = std::get_if<RidKeyedSum>(&v)) {
    out << "sum{";
    bool first = true;
    for (const auto& [rid, val] : r->entries) {
      if (!first) out << ",";
      first = false;
      out << to_hex(rid) << ":" << val;
    }
    out << "}";
  } else {
    const auto& t = std::get<TileStore>(v);
    out << "tiles{";
    bool first = true;
    for (const auto& [id, cell] : t.entries) {
      if (!first) out << ",";
      first = false;
      out << to_hex(id) << ":" << canonical_text(cell);
    }
    out << "}";
  }
  return out.str();
}

}  // namespace sdpf
