#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace probekit {

enum class UNetSide { encoder, bottleneck, decoder };

// One self-attention cell of the denoising U-Net.
struct LayerInfo {
  std::string_view id;  // "<block>.sa<n>", e.g. "decoder2.sa1"
  UNetSide side;
  std::size_t height;
  std::size_t width;
  std::size_t channels;
};

// The 16 self-attention layers, encoder to decoder order:
// encoder1-3 (2 each, 64/32/16 px, 320/640/1280 ch), bottleneck (1, 8 px,
// 1280 ch), decoder2-4 (3 each, 16/32/64 px, 1280/640/320 ch).
std::span<const LayerInfo> self_attention_layers();

std::optional<LayerInfo> find_layer(std::string_view id);

// Registry decoder layers, or any id starting with "decoder" for
// unregistered names.
bool is_decoder_side(std::string_view id);

}  // namespace probekit
