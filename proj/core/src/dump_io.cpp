#include "probekit/dump_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "probekit/errors.hpp"

namespace probekit {

namespace {

using json = nlohmann::json;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void require(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("truncated ") + what + ": expected " + std::to_string(n) +
                            " bytes, found " + std::to_string(remaining()),
                        pos_);
    }
  }

  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    require(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

json parse_meta(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("meta_json is not valid JSON: ") + e.what(), 12);
  }
}

template <typename T>
T meta_field(const json& meta, const char* key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw FormatError(std::string("meta_json missing '") + key + "'", 12);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("meta_json field '") + key + "' has wrong type", 12);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_raw_dump(const RawDump& dump) {
  if (dump.payload.size() != dump.dims.size()) {
    throw ValidationError("payload length " + std::to_string(dump.payload.size()) +
                          " does not match dims product " + std::to_string(dump.dims.size()));
  }
  for (float v : dump.payload) {
    if (!std::isfinite(v)) throw ValidationError("payload contains non-finite values");
  }
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 + 4 + dump.meta_json.size() + 12 + 4 * dump.payload.size());
  out.insert(out.end(), std::begin(kDumpMagic), std::end(kDumpMagic));
  put_u32(out, kDumpVersion);
  put_u32(out, static_cast<std::uint32_t>(dump.meta_json.size()));
  out.insert(out.end(), dump.meta_json.begin(), dump.meta_json.end());
  put_u32(out, static_cast<std::uint32_t>(dump.dims.height));
  put_u32(out, static_cast<std::uint32_t>(dump.dims.width));
  put_u32(out, static_cast<std::uint32_t>(dump.dims.channels));
  for (float v : dump.payload) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

RawDump decode_raw_dump(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kDumpMagic, 4) != 0) throw FormatError("bad magic", 0);
  std::uint32_t version = in.u32("version");
  if (version != kDumpVersion) {
    throw FormatError("unsupported version " + std::to_string(version), 4);
  }
  std::uint32_t meta_len = in.u32("meta_len");
  auto meta = in.take(meta_len, "meta_json");

  RawDump dump;
  dump.meta_json.assign(meta.begin(), meta.end());
  dump.dims.height = in.u32("dims");
  dump.dims.width = in.u32("dims");
  dump.dims.channels = in.u32("dims");

  const std::size_t count = dump.dims.size();
  const std::size_t payload_offset = in.offset();
  if (in.remaining() != 4 * count) {
    throw FormatError("payload length mismatch: expected " + std::to_string(4 * count) +
                          " bytes, found " + std::to_string(in.remaining()),
                      payload_offset);
  }
  auto raw = in.take(4 * count, "payload");
  dump.payload.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(raw[4 * i + b]) << (8 * b);
    dump.payload[i] = std::bit_cast<float>(u);
  }
  return dump;
}

void write_raw_dump(const RawDump& dump, const std::filesystem::path& path) {
  auto bytes = encode_raw_dump(dump);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

RawDump read_raw_dump(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_raw_dump(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

RawDump to_raw(const ActivationTensor& act) {
  const auto& m = act.meta();
  json meta = {
      {"kind", "activation"},       {"sample_id", m.sample_id},
      {"layer_id", m.layer_id},     {"step", m.step},
      {"model_tag", to_string(m.model_tag)}, {"total_steps", m.total_steps},
  };
  if (m.intervened) {
    meta["intervened"] = true;
    meta["intervention"] = m.intervention_json.empty() ? json::object()
                                                       : json::parse(m.intervention_json);
  }
  RawDump raw;
  raw.meta_json = meta.dump();
  raw.dims = act.shape();
  raw.payload.assign(act.data().begin(), act.data().end());
  return raw;
}

RawDump to_raw(const LabelMap& label) {
  json meta = {{"kind", to_string(label.kind())}, {"sample_id", label.sample_id()}};
  RawDump raw;
  raw.meta_json = meta.dump();
  raw.dims = label.shape();
  raw.payload.assign(label.data().begin(), label.data().end());
  return raw;
}

DumpObject from_raw(const RawDump& raw) {
  json meta = parse_meta(raw.meta_json);
  auto kind = meta_field<std::string>(meta, "kind");
  if (kind == "activation") {
    DumpMeta m;
    m.sample_id = meta_field<std::string>(meta, "sample_id");
    m.layer_id = meta_field<std::string>(meta, "layer_id");
    m.step = meta_field<int>(meta, "step");
    m.total_steps = meta_field<int>(meta, "total_steps");
    m.model_tag = model_tag_from_string(meta_field<std::string>(meta, "model_tag"));
    if (meta.value("intervened", false)) {
      m.intervened = true;
      if (meta.contains("intervention")) m.intervention_json = meta["intervention"].dump();
    }
    return ActivationTensor(raw.dims, raw.payload, std::move(m));
  }
  if (kind == "probe") throw FormatError("dump holds a probe checkpoint, not a tensor", 12);
  LabelKind lk = [&] {
    try {
      return label_kind_from_string(kind);
    } catch (const ValidationError&) {
      throw FormatError("unknown dump kind '" + kind + "'", 12);
    }
  }();
  const std::size_t expected_channels = lk == LabelKind::saliency_logits ? 2 : 1;
  if (raw.dims.channels != expected_channels) {
    throw FormatError("channel count " + std::to_string(raw.dims.channels) +
                          " inconsistent with kind '" + kind + "'",
                      12 + raw.meta_json.size() + 8);
  }
  LabelMap label(lk, raw.dims.height, raw.dims.width, raw.payload,
                 meta_field<std::string>(meta, "sample_id"));
  return label;
}

void write_dump(const ActivationTensor& act, const std::filesystem::path& path) {
  write_raw_dump(to_raw(act), path);
}

void write_dump(const LabelMap& label, const std::filesystem::path& path) {
  write_raw_dump(to_raw(label), path);
}

DumpObject read_dump(const std::filesystem::path& path) { return from_raw(read_raw_dump(path)); }

ActivationTensor read_activation(const std::filesystem::path& path) {
  auto obj = read_dump(path);
  if (auto* a = std::get_if<ActivationTensor>(&obj)) return std::move(*a);
  throw FormatError(path.string() + ": expected an activation dump", 12);
}

LabelMap read_label(const std::filesystem::path& path) {
  auto obj = read_dump(path);
  if (auto* l = std::get_if<LabelMap>(&obj)) return std::move(*l);
  throw FormatError(path.string() + ": expected a label dump", 12);
}

}  // namespace probekit
