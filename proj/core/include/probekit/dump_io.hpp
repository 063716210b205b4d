#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "probekit/tensor.hpp"

namespace probekit {

// Container layout (all integers little-endian):
//
//   "APKD" | u32 version (=1) | u32 meta_len | meta_json (UTF-8)
//   | u32 h | u32 w | u32 c | h*w*c real32 payload, row-major, channel innermost
//
// meta_json carries a "kind" field: "activation", one of the LabelKind
// names, or "probe".
inline constexpr char kDumpMagic[4] = {'A', 'P', 'K', 'D'};
inline constexpr std::uint32_t kDumpVersion = 1;

// Undecoded container contents.
struct RawDump {
  std::string meta_json;
  Shape dims;
  std::vector<float> payload;
};

std::vector<std::uint8_t> encode_raw_dump(const RawDump& dump);
RawDump decode_raw_dump(std::span<const std::uint8_t> bytes);

void write_raw_dump(const RawDump& dump, const std::filesystem::path& path);
RawDump read_raw_dump(const std::filesystem::path& path);

using DumpObject = std::variant<ActivationTensor, LabelMap>;

RawDump to_raw(const ActivationTensor& act);
RawDump to_raw(const LabelMap& label);
DumpObject from_raw(const RawDump& raw);

void write_dump(const ActivationTensor& act, const std::filesystem::path& path);
void write_dump(const LabelMap& label, const std::filesystem::path& path);
DumpObject read_dump(const std::filesystem::path& path);

// Typed convenience readers; throw FormatError when the kind differs.
ActivationTensor read_activation(const std::filesystem::path& path);
LabelMap read_label(const std::filesystem::path& path);

}  // namespace probekit
