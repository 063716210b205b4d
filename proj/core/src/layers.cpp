#include "probekit/layers.hpp"

#include <array>

namespace probekit {

namespace {

constexpr std::array<LayerInfo, 16> kLayers{{
    {"encoder1.sa1", UNetSide::encoder, 64, 64, 320},
    {"encoder1.sa2", UNetSide::encoder, 64, 64, 320},
    {"encoder2.sa1", UNetSide::encoder, 32, 32, 640},
    {"encoder2.sa2", UNetSide::encoder, 32, 32, 640},
    {"encoder3.sa1", UNetSide::encoder, 16, 16, 1280},
    {"encoder3.sa2", UNetSide::encoder, 16, 16, 1280},
    {"bottleneck.sa1", UNetSide::bottleneck, 8, 8, 1280},
    {"decoder2.sa1", UNetSide::decoder, 16, 16, 1280},
    {"decoder2.sa2", UNetSide::decoder, 16, 16, 1280},
    {"decoder2.sa3", UNetSide::decoder, 16, 16, 1280},
    {"decoder3.sa1", UNetSide::decoder, 32, 32, 640},
    {"decoder3.sa2", UNetSide::decoder, 32, 32, 640},
    {"decoder3.sa3", UNetSide::decoder, 32, 32, 640},
    {"decoder4.sa1", UNetSide::decoder, 64, 64, 320},
    {"decoder4.sa2", UNetSide::decoder, 64, 64, 320},
    {"decoder4.sa3", UNetSide::decoder, 64, 64, 320},
}};

}  // namespace

std::span<const LayerInfo> self_attention_layers() { return kLayers; }

std::optional<LayerInfo> find_layer(std::string_view id) {
  for (const auto& l : kLayers) {
    if (l.id == id) return l;
  }
  return std::nullopt;
}

bool is_decoder_side(std::string_view id) {
  if (auto l = find_layer(id)) return l->side == UNetSide::decoder;
  return id.starts_with("decoder");
}

}  // namespace probekit
