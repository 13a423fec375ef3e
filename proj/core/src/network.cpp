#include "spxnet/network.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "spxnet/errors.hpp"

namespace spxnet {

namespace {

std::string level_name(const char* prefix, int level) { return prefix + std::to_string(level); }

Tensor init_kernel(Shape shape, int fan_in, float slope, Rng& rng) {
  const double gain = std::sqrt(2.0 / (1.0 + static_cast<double>(slope) * slope));
  const double bound = gain * std::sqrt(3.0 / std::max(1, fan_in));
  std::vector<float> values(shape.numel());
  for (auto& v : values) v = static_cast<float>(rng.uniform(-bound, bound));
  return Tensor::from(shape, std::move(values));
}

Shape kernel_shape(const LayerPlan& l) {
  // Transposed convolutions store (in, out, kh, kw).
  if (l.kind == LayerKind::deconv) return {l.in_ch, l.out_ch, l.k_h, l.k_w};
  return {l.out_ch, l.in_ch, l.k_h, l.k_w};
}

int fan_in(const LayerPlan& l) {
  if (l.kind == LayerKind::deconv) return l.in_ch * l.k_h * l.k_w / (l.stride * l.stride);
  return l.in_ch * l.k_h * l.k_w;
}

// Kernel and zero bias for one layer, drawn from its own stream.
std::pair<Tensor, Tensor> init_layer(const LayerPlan& l, Rng& rng, float slope) {
  Tensor kernel = init_kernel(kernel_shape(l), fan_in(l), slope, rng);
  Tensor bias = Tensor::zeros({l.out_ch, 1, 1, 1});
  kernel.set_requires_grad(true);
  bias.set_requires_grad(true);
  return {kernel, bias};
}

LayerPlan conv3x3(std::string name, LayerKind kind, int in, int out, bool act, int level) {
  LayerPlan l;
  l.name = std::move(name);
  l.kind = kind;
  l.in_ch = in;
  l.out_ch = out;
  l.activation = act;
  l.level = level;
  return l;
}

// Images arrive in [0,1]; the network sees them mapped to [-1,1]. Fixed, not
// learned. Without it the shared offset swamps the frame-to-frame difference
// early in training.
Tensor center_input(const Tensor& x) { return ops::add(ops::scale(x, 2.0f), Tensor::full(x.shape(), -1.0f)); }

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::deconv: return "deconv";
    case LayerKind::predict: return "predict";
    case LayerKind::subpixel: return "subpixel-conv";
    case LayerKind::redirect: return "redirect";
  }
  return "conv";
}

Tensor subpixel_forward(const Tensor& x, const ops::ConvParams& conv1, const ops::ConvParams& conv2,
                        const ops::ConvParams& conv3, int ratio, float slope) {
  Tensor h = ops::leaky_relu(ops::conv2d(x, conv1), slope);
  h = ops::leaky_relu(ops::conv2d(h, conv2), slope);
  return ops::pixel_shuffle(ops::conv2d(h, conv3), ratio);
}

SubPixelModule SubPixelModule::build(const SubPixelModuleSpec& spec, Rng& rng, float leaky_slope) {
  if (spec.in_ch < 1 || spec.hidden_ch < 1 || spec.out_ch < 1 || spec.ratio < 1) {
    throw ConfigError("sub-pixel module channels and ratio must be >= 1");
  }
  SubPixelModule m;
  m.spec_ = spec;
  m.slope_ = leaky_slope;
  const int r2 = spec.ratio * spec.ratio;
  const LayerPlan plans[3] = {
      conv3x3("conv1", LayerKind::subpixel, spec.in_ch, spec.hidden_ch, true, 0),
      conv3x3("conv2", LayerKind::subpixel, spec.hidden_ch, spec.hidden_ch, true, 0),
      conv3x3("conv3", LayerKind::subpixel, spec.hidden_ch, spec.out_ch * r2, false, 0),
  };
  ops::ConvParams* targets[3] = {&m.conv1_, &m.conv2_, &m.conv3_};
  for (int i = 0; i < 3; ++i) {
    auto [k, b] = init_layer(plans[i], rng, leaky_slope);
    *targets[i] = ops::ConvParams{k, b, 1, 1, 1, 1};
  }
  return m;
}

Tensor SubPixelModule::forward(const Tensor& x) const {
  return subpixel_forward(x, conv1_, conv2_, conv3_, spec_.ratio, slope_);
}

std::vector<Tensor> SubPixelModule::parameters() const {
  return {conv1_.kernel, conv1_.bias, conv2_.kernel, conv2_.bias, conv3_.kernel, conv3_.bias};
}

std::size_t SubPixelModule::param_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.numel();
  return n;
}

std::size_t SubPixelModule::expected_param_count(const SubPixelModuleSpec& s) {
  const std::size_t r2 = static_cast<std::size_t>(s.ratio) * s.ratio;
  const std::size_t in = s.in_ch, hid = s.hidden_ch, out = s.out_ch;
  return 9 * (in * hid + hid * hid + hid * out * r2) + hid + hid + out * r2;
}

std::vector<LayerPlan> plan_layers(const TopologySpec& spec) {
  validate(spec);
  const Rational w = spec.encoder.width_mult;
  const int pred = spec.decoder.pred_ch;
  std::vector<LayerPlan> plan;
  std::map<std::string, int> out_channels;

  int channels = spec.encoder.input_ch;
  int level = 0;
  bool in_shared = false;
  for (const auto& l : spec.encoder.layers) {
    if (in_shared && !l.shared) {
      // Correlation joins the two branches after the shared prefix.
      LayerPlan redir = conv3x3("redir", LayerKind::redirect, channels,
                                scaled_channels(spec.encoder.redirect_ch, w), true, level);
      redir.k_h = redir.k_w = 1;
      redir.pad_h = redir.pad_w = 0;
      plan.push_back(redir);
      channels = redir.out_ch + spec.max_disp + 1;
    }
    in_shared = l.shared;
    level += l.stride > 1 ? 1 : 0;
    LayerPlan p;
    p.name = l.name;
    p.kind = LayerKind::conv;
    p.in_ch = channels;
    p.out_ch = scaled_channels(l.out_ch, w);
    p.k_h = l.k_h;
    p.k_w = l.k_w;
    p.stride = l.stride;
    p.pad_h = l.k_h / 2;
    p.pad_w = l.k_w / 2;
    p.level = level;
    plan.push_back(p);
    channels = p.out_ch;
    out_channels[l.name] = p.out_ch;
  }

  const int top = level;
  plan.push_back(conv3x3(level_name("pr", top), LayerKind::predict, channels, pred, false, top));
  const int hidden = scaled_channels(spec.decoder.subpixel_hidden, w);
  const int r2 = spec.decoder.subpixel_ratio * spec.decoder.subpixel_ratio;
  for (const auto& stage : spec.decoder.stages) {
    const int lvl = layer_level(spec, stage.skip);
    const int features = scaled_channels(stage.features, w);
    const int skip_ch = out_channels.at(stage.skip);
    int concat_ch = 0;
    if (spec.decoder.flavor == DecoderFlavor::deconv) {
      LayerPlan up = conv3x3(level_name("upconv", lvl), LayerKind::deconv, channels, features, true, lvl);
      up.k_h = up.k_w = 4;
      up.stride = 2;
      plan.push_back(up);
      concat_ch = features + skip_ch + pred;
    } else {
      const std::string sp = level_name("sp", lvl);
      plan.push_back(conv3x3(sp + ".conv1", LayerKind::subpixel, channels + pred, hidden, true, lvl + 1));
      plan.push_back(conv3x3(sp + ".conv2", LayerKind::subpixel, hidden, hidden, true, lvl + 1));
      plan.push_back(conv3x3(sp + ".conv3", LayerKind::subpixel, hidden, pred * r2, false, lvl + 1));
      concat_ch = pred + skip_ch;
    }
    plan.push_back(conv3x3(level_name("iconv", lvl), LayerKind::conv, concat_ch, features, true, lvl));
    plan.push_back(conv3x3(level_name("pr", lvl), LayerKind::predict, features, pred, false, lvl));
    channels = features;
  }
  return plan;
}

std::vector<Tensor> NetworkInstance::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

Tensor NetworkInstance::parameter(const std::string& name) const {
  const auto it = param_index_.find(name);
  if (it == param_index_.end()) throw ConfigError("no parameter named '" + name + "'");
  return params_[it->second].tensor;
}

ops::ConvParams NetworkInstance::conv_params(const LayerPlan& l) const {
  return ops::ConvParams{parameter(l.name + ".weight"), parameter(l.name + ".bias"), l.stride, l.stride,
                         l.pad_h, l.pad_w};
}

Tensor NetworkInstance::apply(const std::string& layer, const Tensor& x) const {
  const LayerPlan& l = layers_[layer_index_.at(layer)];
  const auto p = conv_params(l);
  Tensor y = l.kind == LayerKind::deconv ? ops::conv2d_transpose(x, p) : ops::conv2d(x, p);
  return l.activation ? ops::leaky_relu(y, topology_.leaky_slope) : y;
}

NetworkOutput NetworkInstance::forward(std::initializer_list<Tensor> views) const {
  return forward(std::span<const Tensor>(views.begin(), views.size()));
}

NetworkOutput NetworkInstance::forward(std::span<const Tensor> views) const {
  const TopologySpec& t = topology_;
  const bool siamese = t.encoder.variant == EncoderVariant::siamese_correlation;
  if (views.empty()) throw ShapeError(t.name + ": no input views");
  if (siamese && views.size() != 2) throw ShapeError(t.name + ": expects separate left and right views");

  std::vector<Tensor> centered;
  for (const auto& v : views) centered.push_back(center_input(v));
  Tensor x = centered.size() == 1 || siamese ? centered[0] : ops::concat_channels(centered);
  const Shape in = x.shape();
  if (in.c != t.encoder.input_ch) {
    throw ShapeError(t.name + ": input has " + std::to_string(in.c) + " channels, expected " +
                     std::to_string(t.encoder.input_ch));
  }
  const int divisor = 1 << t.levels();
  if (in.h % divisor != 0 || in.w % divisor != 0) {
    throw ShapeError(t.name + ": input " + std::to_string(in.h) + "x" + std::to_string(in.w) +
                     " is not divisible by " + std::to_string(divisor));
  }
  if (siamese && centered[1].shape() != in) throw ShapeError(t.name + ": left/right shapes differ");

  std::map<std::string, Tensor> features;
  std::size_t i = 0;
  if (siamese) {
    Tensor left = x;
    Tensor right = centered[1];
    for (; i < t.encoder.layers.size() && t.encoder.layers[i].shared; ++i) {
      const auto& name = t.encoder.layers[i].name;
      left = apply(name, left);
      right = apply(name, right);
      features[name] = left;
    }
    Tensor corr = ops::correlation_1d(left, right, t.max_disp);
    x = ops::concat_channels({apply("redir", left), corr});
  }
  for (; i < t.encoder.layers.size(); ++i) {
    const auto& name = t.encoder.layers[i].name;
    x = apply(name, x);
    features[name] = x;
  }

  NetworkOutput out;
  Tensor pred = apply(level_name("pr", t.levels()), x);
  out.predictions.push_back(pred);
  const int hidden_ratio = t.decoder.subpixel_ratio;
  for (const auto& stage : t.decoder.stages) {
    const int lvl = layer_level(t, stage.skip);
    const Tensor& skip = features.at(stage.skip);
    Tensor cat;
    if (t.decoder.flavor == DecoderFlavor::deconv) {
      Tensor up = apply(level_name("upconv", lvl), x);
      Tensor up_pred = ops::upsample(pred, 2, ops::UpsampleMode::bilinear);
      cat = ops::concat_channels({up, skip, up_pred});
    } else {
      const std::string sp = level_name("sp", lvl);
      auto layer = [this](const std::string& name) { return conv_params(layers_[layer_index_.at(name)]); };
      Tensor refined = subpixel_forward(ops::concat_channels({x, pred}), layer(sp + ".conv1"),
                                        layer(sp + ".conv2"), layer(sp + ".conv3"), hidden_ratio,
                                        t.leaky_slope);
      cat = ops::concat_channels({refined, skip});
    }
    x = apply(level_name("iconv", lvl), cat);
    pred = apply(level_name("pr", lvl), x);
    out.predictions.push_back(pred);
  }
  // Predictions are in units of their own grid; rescale to input pixels.
  const int factor = t.decoder.final_upsample_factor;
  out.full_resolution = ops::scale(ops::upsample(pred, factor, ops::UpsampleMode::bilinear), static_cast<float>(factor));
  return out;
}

NetworkInstance NetworkInstance::clone() const {
  NetworkInstance copy = *this;
  for (auto& p : copy.params_) p.tensor = p.tensor.clone();
  return copy;
}

NetworkInstance make_network(const TopologySpec& spec, std::vector<NamedTensor> params) {
  NetworkInstance net;
  net.topology_ = spec;
  net.layers_ = plan_layers(spec);
  std::vector<std::pair<std::string, Shape>> expected;
  for (std::size_t i = 0; i < net.layers_.size(); ++i) {
    const auto& l = net.layers_[i];
    net.layer_index_[l.name] = i;
    expected.emplace_back(l.name + ".weight", kernel_shape(l));
    expected.emplace_back(l.name + ".bias", Shape{l.out_ch, 1, 1, 1});
  }
  if (params.size() != expected.size()) {
    throw ShapeError(spec.name + ": expected " + std::to_string(expected.size()) + " parameter tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != expected[i].first || params[i].tensor.shape() != expected[i].second) {
      throw ShapeError(spec.name + ": parameter '" + params[i].name + "' " + params[i].tensor.shape().str() +
                       " does not match '" + expected[i].first + "' " + expected[i].second.str());
    }
    params[i].tensor.set_requires_grad(true);
    net.param_index_[params[i].name] = i;
  }
  net.params_ = std::move(params);
  return net;
}

NetworkInstance build_network(const TopologySpec& spec, std::uint64_t seed) {
  std::vector<NamedTensor> params;
  for (const auto& l : plan_layers(spec)) {
    Rng rng(seed, {hash_name(l.name)});
    auto [k, b] = init_layer(l, rng, spec.leaky_slope);
    params.push_back({l.name + ".weight", k});
    params.push_back({l.name + ".bias", b});
  }
  return make_network(spec, std::move(params));
}

std::size_t count_params(const NetworkInstance& net) {
  std::size_t n = 0;
  for (const auto& p : net.parameters()) n += p.tensor.numel();
  return n;
}

std::size_t count_params(const TopologySpec& spec) {
  std::size_t n = 0;
  for (const auto& l : plan_layers(spec)) n += l.param_count();
  return n;
}

std::vector<LayerRow> describe(const TopologySpec& spec, int height, int width) {
  const auto plan = plan_layers(spec);
  const int divisor = 1 << spec.levels();
  if (height % divisor != 0 || width % divisor != 0) {
    throw ShapeError("describe: input must be divisible by " + std::to_string(divisor));
  }
  auto at_level = [&](int channels, int level) { return Shape{1, channels, height >> level, width >> level}; };
  const int pred = spec.decoder.pred_ch;

  std::vector<LayerRow> rows;
  auto add_plan_row = [&](const LayerPlan& l) {
    rows.push_back({l.name, to_string(l.kind), l.k_h, l.k_w, l.stride, l.in_ch, l.out_ch, l.param_count(),
                    at_level(l.out_ch, l.level)});
  };
  for (const auto& l : plan) {
    if (l.kind == LayerKind::redirect) {
      const int corr = spec.max_disp + 1;
      rows.push_back({"corr", "correlation_1d", 1, spec.max_disp + 1, 1, l.in_ch, corr, 0, at_level(corr, l.level)});
    }
    if (l.kind == LayerKind::deconv) {
      rows.push_back({"up_pr" + std::to_string(l.level + 1), "upsample", 0, 0, 2, pred, pred, 0,
                      at_level(pred, l.level)});
    }
    add_plan_row(l);
    if (l.kind == LayerKind::subpixel && l.name.ends_with(".conv3")) {
      const std::string base = l.name.substr(0, l.name.size() - 6);
      rows.push_back({base + ".shuffle", "pixel_shuffle", 0, 0, spec.decoder.subpixel_ratio, l.out_ch, pred, 0,
                      at_level(pred, l.level - 1)});
    }
  }
  rows.push_back({"final_upsample", "upsample", 0, 0, spec.decoder.final_upsample_factor, pred, pred, 0,
                  at_level(pred, 0)});
  return rows;
}

std::string format_layer_table(const std::vector<LayerRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "layer" << std::setw(16) << "kind" << std::setw(8) << "kernel"
     << std::setw(8) << "stride" << std::setw(8) << "in" << std::setw(8) << "out" << std::setw(12) << "params"
     << "output\n";
  std::size_t total = 0;
  for (const auto& r : rows) {
    const std::string kernel = r.k_h > 0 ? std::to_string(r.k_h) + "x" + std::to_string(r.k_w) : "-";
    os << std::setw(16) << r.name << std::setw(16) << r.kind << std::setw(8) << kernel << std::setw(8) << r.stride
       << std::setw(8) << r.in_ch << std::setw(8) << r.out_ch << std::setw(12) << r.params << r.output.str()
       << '\n';
    total += r.params;
  }
  os << "total params: " << total << '\n';
  return os.str();
}

}  // namespace spxnet
