#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spxnet/network.hpp"

namespace spxnet {

// Binary weights file, little-endian throughout:
//   "SPXC" | u16 version | u32 len + topology name | u32 width num | u32 width den
//   | u32 tensor count | per tensor: u32 len + name, u32 rank, u32 dims[rank], f32 payload
// Checkpoints append an optimizer section after the tensors, which weight
// readers ignore.
inline constexpr std::string_view kWeightsMagic = "SPXC";
inline constexpr std::uint16_t kWeightsVersion = 1;

struct WeightsBlob {
  std::string topology_name;
  Rational width_mult;
  std::vector<NamedTensor> tensors;
};

// Tensor list encoding shared by weights and optimizer sections.
std::string encode_tensors(const std::vector<NamedTensor>& tensors);
// Decodes a tensor list starting at `offset`; advances it past the list.
std::vector<NamedTensor> decode_tensors(std::string_view bytes, std::size_t& offset);

std::string encode_weights(const WeightsBlob& blob);
// `consumed`, if given, receives the byte length of the weights part.
WeightsBlob decode_weights(std::string_view bytes, std::size_t* consumed = nullptr);

WeightsBlob to_blob(const NetworkInstance& net);

// Writes to a temporary sibling and renames, so readers never see a
// partially written file.
void save_weights(const NetworkInstance& net, const std::filesystem::path& path);

// Rebuilds a named preset topology (encoder depth inferred from the tensors
// present) when `topology` is empty; otherwise checks every tensor against
// `topology` and throws ShapeError on mismatch.
NetworkInstance load_weights(const std::filesystem::path& path,
                             const std::optional<TopologySpec>& topology = std::nullopt);
NetworkInstance network_from_blob(const WeightsBlob& blob, const std::optional<TopologySpec>& topology);

void atomic_write(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace spxnet
