#include "sdpf/flow.hpp"

#include <algorithm>

#include "sdpf/rng.hpp"

namespace sdpf {

Metadata MetadataDraft::build() const {
  if (!id) throw MissingFieldError("increment missing field: id");
  if (!target) throw MissingFieldError("increment missing field: target");
  if (!op) throw MissingFieldError("increment missing field: op");
  if (!next) throw MissingFieldError("increment missing field: next");
  if (!rid) throw MissingFieldError("increment missing field: rid");
  return Metadata{*id, *target, *op, *next, *rid};
}

namespace {

void put_u8(std::string& out, std::uint8_t v) {
  out.push_back(static_cast<char>(v));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void put_i64(std::string& out, std::int64_t v) {
  put_u64(out, static_cast<std::uint64_t>(v));
}

void put_rid(std::string& out, const Rid& r) {
  put_u64(out, r.hi);
  put_u64(out, r.lo);
}

void put_bytes(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[i]);
    return v;
  }

  std::uint64_t u64() {
    auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[i]);
    return v;
  }

  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

  Rid rid() {
    Rid r;
    r.hi = u64();
    r.lo = u64();
    return r;
  }

  std::string bytes() {
    std::uint32_t n = u32();
    return std::string(take(n));
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw CodecError("truncated increment encoding");
    }
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

enum PayloadKind : std::uint8_t {
  kRaw = 0,
  kMax = 1,
  kSet = 2,
  kSum = 3,
  kTiles = 4,
};

std::string encode_value_body(const JoinValue& v) {
  std::string out;
  if (const auto* m = std::get_if<MaxRegister>(&v)) {
    put_i64(out, m->value);
  } else if (const auto* s = std::get_if<GrowSet>(&v)) {
    put_u32(out, static_cast<std::uint32_t>(s->elements.size()));
    for (const auto& e : s->elements) put_bytes(out, e);
  } else if (const auto* r = std::get_if<RidKeyedSum>(&v)) {
    put_u32(out, static_cast<std::uint32_t>(r->entries.size()));
    for (const auto& [rid, val] : r->entries) {
      put_rid(out, rid);
      put_i64(out, val);
    }
  } else {
    const auto& t = std::get<TileStore>(v);
    put_u32(out, static_cast<std::uint32_t>(t.entries.size()));
    for (const auto& [id, cell] : t.entries) {
      put_u64(out, id);
      put_u8(out, cell.state == TileCell::State::Present ? 0 : 1);
      put_rid(out, cell.rid);
      if (cell.state == TileCell::State::Present) {
        put_bytes(out, cell.payload);
      } else {
        put_u8(out, cell.forward ? 1 : 0);
        if (cell.forward) put_u64(out, *cell.forward);
      }
    }
  }
  return out;
}

JoinValue decode_value_body(std::uint8_t kind, Reader& in) {
  switch (kind) {
    case kMax:
      return MaxRegister{in.i64()};
    case kSet: {
      GrowSet s;
      std::uint32_t n = in.u32();
      for (std::uint32_t i = 0; i < n; ++i) s.elements.insert(in.bytes());
      return s;
    }
    case kSum: {
      RidKeyedSum r;
      std::uint32_t n = in.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        Rid rid = in.rid();
        std::int64_t val = in.i64();
        r.entries.emplace(rid, val);
      }
      return r;
    }
    case kTiles: {
      TileStore t;
      std::uint32_t n = in.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        TileId id = in.u64();
        std::uint8_t state = in.u8();
        Rid rid = in.rid();
        TileCell cell;
        if (state == 0) {
          cell = TileCell::present(in.bytes(), rid);
        } else {
          std::optional<TileId> fwd;
          if (in.u8() != 0) fwd = in.u64();
          cell = TileCell::tombstone(rid, fwd);
        }
        t.entries.emplace(id, cell);
      }
      return t;
    }
    default:
      throw CodecError("unknown payload kind " + std::to_string(kind));
  }
}

}  // namespace

std::string encode_payload(const Payload& p) {
  if (const auto* raw = std::get_if<std::string>(&p)) return *raw;
  return encode_value_body(std::get<JoinValue>(p));
}

std::int64_t Increment::payload_bytes() const {
  return static_cast<std::int64_t>(encode_payload(payload).size());
}

std::string encode_increment(const Increment& inc) {
  std::string out;
  put_u64(out, inc.meta.id);
  put_u64(out, inc.meta.target);
  put_u32(out, inc.meta.op);
  put_u32(out, inc.meta.next);
  put_rid(out, inc.meta.rid);
  if (const auto* raw = std::get_if<std::string>(&inc.payload)) {
    put_u8(out, kRaw);
    put_bytes(out, *raw);
  } else {
    const auto& v = std::get<JoinValue>(inc.payload);
    put_u8(out, static_cast<std::uint8_t>(kMax + v.index()));
    out += encode_value_body(v);
  }
  return out;
}

Increment decode_increment(std::string_view bytes) {
  Reader in(bytes);
  Increment inc;
  inc.meta.id = in.u64();
  inc.meta.target = in.u64();
  inc.meta.op = in.u32();
  inc.meta.next = in.u32();
  inc.meta.rid = in.rid();
  std::uint8_t kind = in.u8();
  if (kind == kRaw) {
    inc.payload = in.bytes();
  } else {
    inc.payload = decode_value_body(kind, in);
  }
  if (!in.done()) throw CodecError("trailing bytes after increment");
  return inc;
}

RidProvenance make_provenance(std::vector<TileId> tile_ids, OpCode op,
                              std::uint32_t rule_tag, std::uint32_t position) {
  std::sort(tile_ids.begin(), tile_ids.end());
  return RidProvenance{std::move(tile_ids), op, rule_tag, position};
}

Rid derive_rid(const RidProvenance& provenance) {
  std::string buf;
  put_u32(buf, static_cast<std::uint32_t>(provenance.tile_ids.size()));
  for (TileId id : provenance.tile_ids) put_u64(buf, id);
  put_u32(buf, provenance.op);
  put_u32(buf, provenance.rule_tag);
  put_u32(buf, provenance.position);
  return hash128(buf);
}

void OpRegistry::register_op(OpCode op, std::string name, OpFn fn) {
  ops_[op] = Entry{std::move(name), std::move(fn)};
}

const std::string& OpRegistry::name_of(OpCode op) const {
  auto it = ops_.find(op);
  if (it == ops_.end()) {
    throw UnknownOpError("unregistered op-code " + std::to_string(op));
  }
  return it->second.name;
}

std::vector<Increment> OpRegistry::apply_op(OpCode op, std::string_view payload,
                                            OpCode next) const {
  auto it = ops_.find(op);
  if (it == ops_.end()) {
    throw UnknownOpError("unregistered op-code " + std::to_string(op) +
                         ": no information on how to process");
  }
  return it->second.fn(payload, next);
}

std::string encode_max_extract(const MaxExtractPayload& p) {
  std::string out;
  put_u64(out, p.source_tile);
  put_u64(out, p.out_target);
  put_u32(out, static_cast<std::uint32_t>(p.values.size()));
  for (auto v : p.values) put_i64(out, v);
  return out;
}

MaxExtractPayload decode_max_extract(std::string_view bytes) {
  Reader in(bytes);
  MaxExtractPayload p;
  p.source_tile = in.u64();
  p.out_target = in.u64();
  std::uint32_t n = in.u32();
  p.values.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) p.values.push_back(in.i64());
  return p;
}

std::string encode_pair_half(const PairHalfPayload& p) {
  std::string out;
  put_u64(out, p.pair_key);
  put_u8(out, p.side);
  put_i64(out, p.value);
  put_u64(out, p.out_target);
  // Padded to the size of the combined output's merge payload so every
  // increment in a pair workload accounts the same number of bytes.
  out.append(3, '\0');
  return out;
}

PairHalfPayload decode_pair_half(std::string_view bytes) {
  Reader in(bytes);
  PairHalfPayload p;
  p.pair_key = in.u64();
  p.side = in.u8();
  p.value = in.i64();
  p.out_target = in.u64();
  return p;
}

std::string encode_pair_input(const PairHalfPayload& left,
                              const PairHalfPayload& right) {
  return encode_pair_half(left) + encode_pair_half(right);
}

namespace {

std::vector<Increment> op_max_extract(std::string_view payload, OpCode next) {
  auto in = decode_max_extract(payload);
  std::int64_t best = std::numeric_limits<std::int64_t>::min();
  for (auto v : in.values) best = std::max(best, v);
  Increment out;
  out.meta.id = mix64(in.source_tile ^ 0x6d61785fu);
  out.meta.target = in.out_target;
  out.meta.op = next;
  out.meta.next = kOpTerminal;
  out.meta.rid =
      derive_rid(make_provenance({in.source_tile}, kOpMaxExtract, 0, 0));
  out.payload = JoinValue{MaxRegister{best}};
  return {out};
}

std::vector<Increment> op_pair_join(std::string_view payload, OpCode next) {
  // Expects two concatenated halves, left first.
  constexpr std::size_t half = 28;  // u64 + u8 + i64 + u64 + padding
  if (payload.size() != 2 * half) {
    throw CodecError("pair-join payload must be two halves");
  }
  auto l = decode_pair_half(payload.substr(0, half));
  auto r = decode_pair_half(payload.substr(half));
  if (l.pair_key != r.pair_key || l.side != 0 || r.side != 1) {
    throw CodecError("pair-join halves do not form a pair");
  }
  Increment out;
  out.meta.id = mix64(l.pair_key ^ 0x706169725fu);
  out.meta.target = l.out_target;
  out.meta.op = next;
  out.meta.next = kOpTerminal;
  out.meta.rid = derive_rid(make_provenance(
      {l.pair_key}, kOpPairJoin, 0, 0));
  RidKeyedSum contribution;
  contribution.entries.emplace(out.meta.rid, l.value + r.value);
  out.payload = JoinValue{contribution};
  return {out};
}

}  // namespace

OpRegistry standard_registry() {
  OpRegistry reg;
  reg.register_op(kOpMerge, "merge", [](std::string_view, OpCode) {
    // Terminal: merging happens at the owning node, not via apply_op.
    return std::vector<Increment>{};
  });
  reg.register_op(kOpMaxExtract, "max-extract", op_max_extract);
  reg.register_op(kOpPairJoin, "pair-join", op_pair_join);
  return reg;
}

}  // namespace sdpf
