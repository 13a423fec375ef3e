#include "spxnet/weights_io.hpp"

#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "spxnet/errors.hpp"

namespace spxnet {

namespace {
constexpr std::size_t kMaxName = 1 << 12;
constexpr std::uint32_t kMaxTensors = 1 << 20;
}  // namespace

std::string encode_tensors(const std::vector<NamedTensor>& tensors) {
  detail::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    const Shape s = t.tensor.shape();
    w.str(t.name);
    w.u32(4);
    for (int d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.tensor.data()) w.f32(v);
  }
  return w.take();
}

std::vector<NamedTensor> decode_tensors(std::string_view bytes, std::size_t& offset) {
  if (offset > bytes.size()) throw FormatError("tensor section offset out of range");
  detail::ByteReader r(bytes.substr(offset));
  const std::uint32_t count = r.u32();
  if (count > kMaxTensors) throw FormatError("tensor count " + std::to_string(count) + " exceeds limit");
  std::vector<NamedTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str(kMaxName);
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 4) throw FormatError("tensor '" + t.name + "' has unsupported rank " + std::to_string(rank));
    int dims[4] = {1, 1, 1, 1};
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t v = r.u32();
      if (v == 0 || v > (1u << 24)) throw FormatError("tensor '" + t.name + "' has invalid dimension");
      dims[4 - rank + d] = static_cast<int>(v);
      numel *= v;
    }
    if (numel * 4 > r.remaining()) throw FormatError("tensor '" + t.name + "' payload truncated");
    std::vector<float> values(numel);
    for (auto& v : values) v = r.f32();
    t.tensor = Tensor::from({dims[0], dims[1], dims[2], dims[3]}, std::move(values));
    tensors.push_back(std::move(t));
  }
  offset += r.position();
  return tensors;
}

std::string encode_weights(const WeightsBlob& blob) {
  detail::ByteWriter w;
  w.bytes(kWeightsMagic);
  w.u16(kWeightsVersion);
  w.str(blob.topology_name);
  w.u32(blob.width_mult.num);
  w.u32(blob.width_mult.den);
  w.bytes(encode_tensors(blob.tensors));
  return w.take();
}

WeightsBlob decode_weights(std::string_view bytes, std::size_t* consumed) {
  detail::ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != kWeightsMagic) throw FormatError("bad magic: not a weights file");
  const std::uint16_t version = r.u16();
  if (version != kWeightsVersion) throw FormatError("unsupported weights version " + std::to_string(version));
  WeightsBlob blob;
  blob.topology_name = r.str(kMaxName);
  blob.width_mult.num = r.u32();
  blob.width_mult.den = r.u32();
  if (blob.width_mult.num == 0 || blob.width_mult.den == 0) throw FormatError("invalid width multiplier");
  std::size_t offset = r.position();
  blob.tensors = decode_tensors(bytes, offset);
  if (consumed) *consumed = offset;
  return blob;
}

WeightsBlob to_blob(const NetworkInstance& net) {
  return {net.topology().name, net.topology().encoder.width_mult, net.parameters()};
}

void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void save_weights(const NetworkInstance& net, const std::filesystem::path& path) {
  atomic_write(path, encode_weights(to_blob(net)));
}

NetworkInstance network_from_blob(const WeightsBlob& blob, const std::optional<TopologySpec>& topology) {
  if (topology) return make_network(*topology, blob.tensors);
  if (!is_topology_name(blob.topology_name)) {
    throw FormatError("weights for custom topology '" + blob.topology_name + "' need an explicit topology");
  }
  int levels = 0;
  for (int level = 1; level <= 6; ++level) {
    const std::string name = "conv" + std::to_string(level) + ".weight";
    for (const auto& t : blob.tensors) {
      if (t.name == name) levels = level;
    }
  }
  if (levels == 0) throw FormatError("weights contain no encoder tensors");
  return make_network(make_topology(blob.topology_name, blob.width_mult, levels), blob.tensors);
}

NetworkInstance load_weights(const std::filesystem::path& path, const std::optional<TopologySpec>& topology) {
  return network_from_blob(decode_weights(read_file(path)), topology);
}

}  // namespace spxnet
