#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spxnet/keyvalue.hpp"

namespace spxnet {

// Non-negative rational, used for the channel width multiplier.
struct Rational {
  std::uint32_t num = 1;
  std::uint32_t den = 1;

  double value() const { return static_cast<double>(num) / den; }
  std::string str() const;
  // Accepts "q", "p/q" or a decimal that is an exact binary fraction.
  static Rational parse(const std::string& text);

  friend bool operator==(const Rational&, const Rational&) = default;
};

// max(1, round(base * w))
int scaled_channels(int base, Rational w);

enum class EncoderVariant { standard, rectangular, siamese_correlation, mono };
enum class DecoderFlavor { deconv, subpixel };

std::string to_string(EncoderVariant v);
std::string to_string(DecoderFlavor f);
EncoderVariant parse_encoder_variant(const std::string& s);
DecoderFlavor parse_decoder_flavor(const std::string& s);

// One encoder convolution. A stride > 1 starts a new resolution level.
// Channel counts are full-width values; width_mult applies at build time.
struct EncoderLayer {
  std::string name;
  int out_ch = 0;
  int k_h = 3;
  int k_w = 3;
  int stride = 1;
  bool shared = false;  // siamese: applied to both views with one set of weights

  friend bool operator==(const EncoderLayer&, const EncoderLayer&) = default;
};

struct EncoderSpec {
  std::vector<EncoderLayer> layers;
  EncoderVariant variant = EncoderVariant::standard;
  Rational width_mult;
  int input_ch = 6;       // channels of the (concatenated) network input; per view for siamese
  int redirect_ch = 64;   // siamese only: 1x1 redirect of the left features

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

// One decoder stage, coarse to fine. `skip` names the encoder layer whose
// output is concatenated in; `features` is the iconv width.
struct DecoderStage {
  std::string skip;
  int features = 0;

  friend bool operator==(const DecoderStage&, const DecoderStage&) = default;
};

struct DecoderSpec {
  DecoderFlavor flavor = DecoderFlavor::deconv;
  std::vector<DecoderStage> stages;
  int pred_ch = 2;
  int final_upsample_factor = 4;
  int subpixel_hidden = 32;
  int subpixel_ratio = 2;

  friend bool operator==(const DecoderSpec&, const DecoderSpec&) = default;
};

struct TopologySpec {
  std::string name;
  EncoderSpec encoder;
  DecoderSpec decoder;
  int max_disp = 35;
  float leaky_slope = 0.1f;

  bool is_flow() const { return decoder.pred_ch == 2; }
  // Number of images forward() expects.
  int views() const;
  // Number of stride-2 encoder levels; inputs must be divisible by 2^levels.
  int levels() const;

  friend bool operator==(const TopologySpec&, const TopologySpec&) = default;
};

// The nine named networks: flownet, flospnet, dispnet, despnet, despnet2,
// dispnet_c, despnet_c, dispnet_mono, despnet_mono.
const std::vector<std::string>& topology_names();
bool is_topology_name(std::string_view name);

// Named preset. `encoder_levels` truncates the six-level encoder ladder
// (the desk preset uses 5 levels for 64x64 inputs).
TopologySpec make_topology(std::string_view name, Rational width_mult = {}, int encoder_levels = 6);

// Throws ConfigError if layers, skips and channel wiring are inconsistent.
void validate(const TopologySpec& spec);

// Resolution level of an encoder layer (1 = first stride-2 layer).
int layer_level(const TopologySpec& spec, std::string_view layer_name);

// `key = value` form covering every field. topology_from_config starts from
// the preset named by `name` (with width_mult, encoder_levels) and applies
// any field overrides present, so a three-line config is a valid topology.
KeyValueConfig to_config(const TopologySpec& spec, const std::string& prefix = "");
TopologySpec topology_from_config(const KeyValueConfig& cfg, const std::string& prefix = "");

}  // namespace spxnet
