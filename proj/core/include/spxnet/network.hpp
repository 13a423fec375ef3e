#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spxnet/ops.hpp"
#include "spxnet/rng.hpp"
#include "spxnet/topology.hpp"

namespace spxnet {

// conv3x3(in->hidden)+lrelu, conv3x3(hidden->hidden)+lrelu,
// conv3x3(hidden->out*r*r), pixel_shuffle(r).
struct SubPixelModuleSpec {
  int in_ch = 1;
  int hidden_ch = 32;
  int out_ch = 1;
  int ratio = 2;
};

class SubPixelModule {
 public:
  static SubPixelModule build(const SubPixelModuleSpec& spec, Rng& rng, float leaky_slope = 0.1f);

  Tensor forward(const Tensor& x) const;
  const SubPixelModuleSpec& spec() const { return spec_; }
  std::size_t param_count() const;
  // 9*(in*hidden + hidden^2 + hidden*out*r^2) + 2*hidden + out*r^2
  static std::size_t expected_param_count(const SubPixelModuleSpec& spec);
  std::vector<Tensor> parameters() const;

 private:
  friend class NetworkInstance;
  SubPixelModuleSpec spec_;
  ops::ConvParams conv1_, conv2_, conv3_;
  float slope_ = 0.1f;
};

Tensor subpixel_forward(const Tensor& x, const ops::ConvParams& conv1, const ops::ConvParams& conv2,
                        const ops::ConvParams& conv3, int ratio, float slope);

// Role of a convolution in a built network.
enum class LayerKind { conv, deconv, predict, subpixel, redirect };
std::string to_string(LayerKind kind);

// One parameterized convolution, in execution order.
struct LayerPlan {
  std::string name;
  LayerKind kind = LayerKind::conv;
  int in_ch = 0;
  int out_ch = 0;
  int k_h = 3;
  int k_w = 3;
  int stride = 1;
  int pad_h = 1;
  int pad_w = 1;
  bool activation = true;  // leaky ReLU after the layer
  int level = 0;           // output resolution is input / 2^level

  std::size_t param_count() const {
    return static_cast<std::size_t>(in_ch) * out_ch * k_h * k_w + out_ch;
  }
};

// Every parameterized layer of a topology at its width multiplier.
std::vector<LayerPlan> plan_layers(const TopologySpec& spec);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct NetworkOutput {
  std::vector<Tensor> predictions;  // coarse to fine
  Tensor full_resolution;
};

class NetworkInstance {
 public:
  NetworkInstance() = default;

  const TopologySpec& topology() const { return topology_; }
  const std::vector<LayerPlan>& layers() const { return layers_; }

  // "<layer>.weight" / "<layer>.bias" in layer order.
  const std::vector<NamedTensor>& parameters() const { return params_; }
  std::vector<Tensor> parameter_tensors() const;
  Tensor parameter(const std::string& name) const;

  // `views`: one tensor with all input channels, or one tensor per image
  // (frame1/frame2, left/right) which is concatenated unless the topology
  // is siamese.
  NetworkOutput forward(std::span<const Tensor> views) const;
  NetworkOutput forward(std::initializer_list<Tensor> views) const;

  // Deep copy with independent parameter storage.
  NetworkInstance clone() const;

 private:
  friend NetworkInstance build_network(const TopologySpec& spec, std::uint64_t seed);
  friend NetworkInstance make_network(const TopologySpec& spec, std::vector<NamedTensor> params);

  ops::ConvParams conv_params(const LayerPlan& layer) const;
  Tensor apply(const std::string& layer, const Tensor& x) const;

  TopologySpec topology_;
  std::vector<LayerPlan> layers_;
  std::map<std::string, std::size_t> layer_index_;
  std::vector<NamedTensor> params_;
  std::map<std::string, std::size_t> param_index_;
};

// Parameters are drawn per layer from Rng(seed, {hash(layer name)}), so
// layers with the same name and shape initialize identically across
// topologies. Weights: Kaiming-uniform over fan-in for leaky ReLU; biases: 0.
NetworkInstance build_network(const TopologySpec& spec, std::uint64_t seed);

// Network over existing tensors; names and shapes must match the plan.
NetworkInstance make_network(const TopologySpec& spec, std::vector<NamedTensor> params);

std::size_t count_params(const NetworkInstance& net);
std::size_t count_params(const TopologySpec& spec);

struct LayerRow {
  std::string name;
  std::string kind;
  int k_h = 0;
  int k_w = 0;
  int stride = 0;
  int in_ch = 0;
  int out_ch = 0;
  std::size_t params = 0;
  Shape output;
};

// Layer table for an (height, width) input, including parameter-free ops
// (correlation, pixel shuffle, upsampling) with zero parameters.
std::vector<LayerRow> describe(const TopologySpec& spec, int height, int width);
std::string format_layer_table(const std::vector<LayerRow>& rows);

}  // namespace spxnet
