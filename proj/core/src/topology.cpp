#include "spxnet/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <set>

#include "spxnet/errors.hpp"

namespace spxnet {

std::string Rational::str() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

Rational Rational::parse(const std::string& text) {
  const std::string t = trim(text);
  auto parse_u32 = [&t](const std::string& part) {
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos || part.size() > 9) {
      throw ConfigError("invalid rational '" + t + "'");
    }
    return static_cast<std::uint32_t>(std::stoul(part));
  };
  Rational r;
  if (const auto slash = t.find('/'); slash != std::string::npos) {
    r = {parse_u32(t.substr(0, slash)), parse_u32(t.substr(slash + 1))};
  } else if (const auto dot = t.find('.'); dot != std::string::npos) {
    const std::string frac = t.substr(dot + 1);
    if (frac.size() > 8) throw ConfigError("invalid rational '" + t + "'");
    std::uint32_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    r = {parse_u32(t.substr(0, dot)) * den + (frac.empty() ? 0 : parse_u32(frac)), den};
  } else {
    r = {parse_u32(t), 1};
  }
  if (r.den == 0 || r.num == 0) throw ConfigError("rational '" + t + "' must be positive");
  const std::uint32_t g = std::gcd(r.num, r.den);
  return {r.num / g, r.den / g};
}

int scaled_channels(int base, Rational w) {
  const long scaled = std::lround(static_cast<double>(base) * w.num / w.den);
  return static_cast<int>(std::max(1L, scaled));
}

std::string to_string(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::standard: return "standard";
    case EncoderVariant::rectangular: return "rectangular";
    case EncoderVariant::siamese_correlation: return "siamese-correlation";
    case EncoderVariant::mono: return "mono";
  }
  return "standard";
}

std::string to_string(DecoderFlavor f) { return f == DecoderFlavor::deconv ? "deconv" : "subpixel"; }

EncoderVariant parse_encoder_variant(const std::string& s) {
  if (s == "standard") return EncoderVariant::standard;
  if (s == "rectangular") return EncoderVariant::rectangular;
  if (s == "siamese-correlation") return EncoderVariant::siamese_correlation;
  if (s == "mono") return EncoderVariant::mono;
  throw ConfigError("unknown encoder variant '" + s + "'");
}

DecoderFlavor parse_decoder_flavor(const std::string& s) {
  if (s == "deconv") return DecoderFlavor::deconv;
  if (s == "subpixel") return DecoderFlavor::subpixel;
  throw ConfigError("unknown decoder flavor '" + s + "'");
}

int TopologySpec::views() const {
  if (encoder.variant == EncoderVariant::siamese_correlation) return 2;
  if (encoder.variant == EncoderVariant::mono) return 1;
  return std::max(1, encoder.input_ch / 3);
}

int TopologySpec::levels() const {
  int level = 0;
  for (const auto& l : encoder.layers) level += l.stride > 1 ? 1 : 0;
  return level;
}

const std::vector<std::string>& topology_names() {
  static const std::vector<std::string> names = {
      "flownet",   "flospnet",  "dispnet",      "despnet",     "despnet2",
      "dispnet_c", "despnet_c", "dispnet_mono", "despnet_mono"};
  return names;
}

bool is_topology_name(std::string_view name) {
  const auto& names = topology_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {

// Full-width ladder shared by every preset; level of each entry in `level`.
struct LadderEntry {
  EncoderLayer layer;
  int level;
};

const std::vector<LadderEntry>& ladder() {
  static const std::vector<LadderEntry> entries = {
      {{"conv1", 64, 7, 7, 2}, 1},      {{"conv2", 128, 5, 5, 2}, 2},
      {{"conv3", 256, 5, 5, 2}, 3},     {{"conv3_1", 256, 3, 3, 1}, 3},
      {{"conv4", 512, 3, 3, 2}, 4},     {{"conv4_1", 512, 3, 3, 1}, 4},
      {{"conv5", 512, 3, 3, 2}, 5},     {{"conv5_1", 512, 3, 3, 1}, 5},
      {{"conv6", 1024, 3, 3, 2}, 6},    {{"conv6_1", 1024, 3, 3, 1}, 6},
  };
  return entries;
}

}  // namespace

TopologySpec make_topology(std::string_view name, Rational width_mult, int encoder_levels) {
  if (!is_topology_name(name)) throw ConfigError("unknown topology '" + std::string(name) + "'");
  if (encoder_levels < 1 || encoder_levels > 6) throw ConfigError("encoder levels must be in [1, 6]");

  TopologySpec t;
  t.name = std::string(name);
  const bool flow = name == "flownet" || name == "flospnet";
  const bool subpixel = name.starts_with("desp") || name == "flospnet";

  t.encoder.width_mult = width_mult;
  if (name == "despnet2") {
    t.encoder.variant = EncoderVariant::rectangular;
  } else if (name.ends_with("_c")) {
    t.encoder.variant = EncoderVariant::siamese_correlation;
  } else if (name.ends_with("_mono")) {
    t.encoder.variant = EncoderVariant::mono;
  }
  t.encoder.input_ch = (t.encoder.variant == EncoderVariant::siamese_correlation ||
                        t.encoder.variant == EncoderVariant::mono)
                           ? 3
                           : 6;
  if (t.encoder.variant == EncoderVariant::siamese_correlation && encoder_levels < 3) {
    throw ConfigError("correlation variants need at least 3 encoder levels");
  }

  std::vector<std::string> last_at_level(encoder_levels + 1);
  for (const auto& [layer, level] : ladder()) {
    if (level > encoder_levels) break;
    EncoderLayer l = layer;
    if (t.encoder.variant == EncoderVariant::rectangular) {
      if (l.name == "conv1") l.k_h = 3, l.k_w = 7;
      if (l.name == "conv2" || l.name == "conv3") l.k_h = 3, l.k_w = 5;
    }
    if (t.encoder.variant == EncoderVariant::siamese_correlation) {
      l.shared = l.name == "conv1" || l.name == "conv2" || l.name == "conv3";
    }
    t.encoder.layers.push_back(l);
    last_at_level[level] = l.name;
  }

  t.decoder.flavor = subpixel ? DecoderFlavor::subpixel : DecoderFlavor::deconv;
  t.decoder.pred_ch = flow ? 2 : 1;
  // Flow stops at 1/4 resolution, disparity one stage later at 1/2.
  const int finest_target = flow ? 2 : 1;
  int finest = encoder_levels;
  for (int level = encoder_levels - 1; level >= finest_target; --level) {
    t.decoder.stages.push_back({last_at_level[level], 1 << (level + 4)});
    finest = level;
  }
  t.decoder.final_upsample_factor = 1 << finest;
  validate(t);
  return t;
}

int layer_level(const TopologySpec& spec, std::string_view layer_name) {
  int level = 0;
  for (const auto& l : spec.encoder.layers) {
    level += l.stride > 1 ? 1 : 0;
    if (l.name == layer_name) return level;
  }
  throw ConfigError("no encoder layer named '" + std::string(layer_name) + "'");
}

void validate(const TopologySpec& spec) {
  const auto& enc = spec.encoder;
  const auto& dec = spec.decoder;
  if (spec.name.empty()) throw ConfigError("topology needs a name");
  if (enc.layers.empty()) throw ConfigError("encoder has no layers");
  if (enc.input_ch < 1) throw ConfigError("encoder input_ch must be >= 1");
  if (enc.width_mult.num == 0 || enc.width_mult.den == 0) throw ConfigError("width_mult must be positive");

  std::set<std::string> names;
  bool shared_prefix = true;
  int shared_count = 0;
  for (const auto& l : enc.layers) {
    if (!names.insert(l.name).second) throw ConfigError("duplicate encoder layer '" + l.name + "'");
    if (l.out_ch < 1 || l.k_h < 1 || l.k_w < 1) throw ConfigError("encoder layer '" + l.name + "' has invalid geometry");
    if (l.stride != 1 && l.stride != 2) throw ConfigError("encoder layer '" + l.name + "': stride must be 1 or 2");
    if (l.shared && !shared_prefix) throw ConfigError("shared encoder layers must form a prefix");
    shared_prefix = shared_prefix && l.shared;
    shared_count += l.shared ? 1 : 0;
  }
  if (enc.layers.front().stride != 2) throw ConfigError("first encoder layer must have stride 2");

  const bool siamese = enc.variant == EncoderVariant::siamese_correlation;
  if (siamese && (shared_count == 0 || shared_count == static_cast<int>(enc.layers.size()))) {
    throw ConfigError("siamese encoder needs a shared prefix followed by unshared layers");
  }
  if (!siamese && shared_count > 0) throw ConfigError("only the siamese-correlation variant shares layers");
  if (siamese && (spec.max_disp < 0 || enc.redirect_ch < 1)) {
    throw ConfigError("correlation needs max_disp >= 0 and redirect_ch >= 1");
  }

  if (dec.pred_ch != 1 && dec.pred_ch != 2) throw ConfigError("pred_ch must be 1 or 2");
  if (dec.subpixel_ratio != 2) throw ConfigError("decoder stages halve resolution; subpixel_ratio must be 2");
  if (dec.subpixel_hidden < 1) throw ConfigError("subpixel_hidden must be >= 1");

  int previous = spec.levels();
  for (const auto& stage : dec.stages) {
    if (!names.count(stage.skip)) throw ConfigError("decoder skip '" + stage.skip + "' is not an encoder layer");
    if (stage.features < 1) throw ConfigError("decoder stage features must be >= 1");
    const int level = layer_level(spec, stage.skip);
    if (level != previous - 1) {
      throw ConfigError("decoder skip '" + stage.skip + "' is at level " + std::to_string(level) +
                        ", expected " + std::to_string(previous - 1));
    }
    // The skip must be the last layer of its level so its resolution matches.
    for (std::size_t i = 0; i + 1 < enc.layers.size(); ++i) {
      if (enc.layers[i].name == stage.skip && enc.layers[i + 1].stride == 1) {
        throw ConfigError("decoder skip '" + stage.skip + "' is not the last layer of its level");
      }
    }
    previous = level;
  }
  if (dec.final_upsample_factor != (1 << previous)) {
    throw ConfigError("final_upsample_factor must be " + std::to_string(1 << previous));
  }
}

KeyValueConfig to_config(const TopologySpec& spec, const std::string& prefix) {
  KeyValueConfig cfg;
  auto put = [&](const std::string& key, const std::string& value) { cfg.set(prefix + key, value); };
  put("name", spec.name);
  put("width_mult", spec.encoder.width_mult.str());
  put("encoder_levels", std::to_string(spec.levels()));
  put("encoder.variant", to_string(spec.encoder.variant));
  put("encoder.input_ch", std::to_string(spec.encoder.input_ch));
  put("encoder.redirect_ch", std::to_string(spec.encoder.redirect_ch));
  std::string layers;
  for (const auto& l : spec.encoder.layers) {
    if (!layers.empty()) layers += ", ";
    layers += l.name + ":" + std::to_string(l.out_ch) + ":" + std::to_string(l.k_h) + "x" +
              std::to_string(l.k_w) + ":" + std::to_string(l.stride) + (l.shared ? ":shared" : "");
  }
  put("encoder.layers", layers);
  put("decoder.flavor", to_string(spec.decoder.flavor));
  std::string stages;
  for (const auto& s : spec.decoder.stages) {
    if (!stages.empty()) stages += ", ";
    stages += s.skip + ":" + std::to_string(s.features);
  }
  put("decoder.stages", stages);
  put("decoder.pred_ch", std::to_string(spec.decoder.pred_ch));
  put("decoder.final_upsample", std::to_string(spec.decoder.final_upsample_factor));
  put("decoder.subpixel_hidden", std::to_string(spec.decoder.subpixel_hidden));
  put("decoder.subpixel_ratio", std::to_string(spec.decoder.subpixel_ratio));
  put("max_disp", std::to_string(spec.max_disp));
  std::ostringstream slope;
  slope << spec.leaky_slope;
  put("leaky_slope", slope.str());
  return cfg;
}

namespace {

int to_int(const std::string& field, const std::string& text) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("invalid integer '" + text + "' in " + field);
}

EncoderLayer parse_layer(const std::string& text) {
  const auto parts = split_list(text, ':');
  if (parts.size() < 4 || parts.size() > 5 || (parts.size() == 5 && parts[4] != "shared")) {
    throw ConfigError("encoder layer '" + text + "' must be name:out_ch:KHxKW:stride[:shared]");
  }
  const auto x = parts[2].find('x');
  if (x == std::string::npos) throw ConfigError("encoder layer '" + text + "': kernel must be KHxKW");
  EncoderLayer l;
  l.name = parts[0];
  l.out_ch = to_int("encoder.layers", parts[1]);
  l.k_h = to_int("encoder.layers", parts[2].substr(0, x));
  l.k_w = to_int("encoder.layers", parts[2].substr(x + 1));
  l.stride = to_int("encoder.layers", parts[3]);
  l.shared = parts.size() == 5;
  return l;
}

}  // namespace

TopologySpec topology_from_config(const KeyValueConfig& cfg, const std::string& prefix) {
  auto key = [&prefix](const char* k) { return prefix + k; };
  const std::string name = cfg.require(key("name"));
  const Rational width = Rational::parse(cfg.get_string(key("width_mult"), "1"));
  const int levels = cfg.get_int(key("encoder_levels"), 6);

  TopologySpec t;
  if (is_topology_name(name)) {
    t = make_topology(name, width, levels);
  } else {
    t.name = name;
    t.encoder.width_mult = width;
  }
  if (auto v = cfg.get(key("encoder.variant"))) t.encoder.variant = parse_encoder_variant(*v);
  t.encoder.input_ch = cfg.get_int(key("encoder.input_ch"), t.encoder.input_ch);
  t.encoder.redirect_ch = cfg.get_int(key("encoder.redirect_ch"), t.encoder.redirect_ch);
  if (auto v = cfg.get(key("encoder.layers"))) {
    t.encoder.layers.clear();
    for (const auto& item : split_list(*v)) t.encoder.layers.push_back(parse_layer(item));
  }
  if (auto v = cfg.get(key("decoder.flavor"))) t.decoder.flavor = parse_decoder_flavor(*v);
  if (auto v = cfg.get(key("decoder.stages"))) {
    t.decoder.stages.clear();
    for (const auto& item : split_list(*v)) {
      const auto parts = split_list(item, ':');
      if (parts.size() != 2) throw ConfigError("decoder stage '" + item + "' must be skip:features");
      t.decoder.stages.push_back({parts[0], to_int("decoder.stages", parts[1])});
    }
  }
  t.decoder.pred_ch = cfg.get_int(key("decoder.pred_ch"), t.decoder.pred_ch);
  t.decoder.final_upsample_factor = cfg.get_int(key("decoder.final_upsample"), t.decoder.final_upsample_factor);
  t.decoder.subpixel_hidden = cfg.get_int(key("decoder.subpixel_hidden"), t.decoder.subpixel_hidden);
  t.decoder.subpixel_ratio = cfg.get_int(key("decoder.subpixel_ratio"), t.decoder.subpixel_ratio);
  t.max_disp = cfg.get_int(key("max_disp"), t.max_disp);
  t.leaky_slope = static_cast<float>(cfg.get_double(key("leaky_slope"), t.leaky_slope));
  validate(t);
  return t;
}

}  // namespace spxnet
