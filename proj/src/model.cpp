#include "adapto/model.hpp"

#include <cmath>

#include "adapto/cost.hpp"
#include "adapto/errors.hpp"
#include "adapto/ops.hpp"
#include "adapto/schedule.hpp"

namespace adapto {

namespace {

// Optional per-layer shape recorder threaded through the block functions.
struct Trace {
  ShapeLog* shapes = nullptr;
  std::string prefix;

  [[nodiscard]] Trace sub(const std::string& name) const { return {shapes, prefix + name + "."}; }
  const Tensor& log(const std::string& name, const Tensor& t) const {
    if (shapes != nullptr) (*shapes)[prefix + name] = t.shape();
    return t;
  }
};

Tensor conv_bn_elu(const Tensor& x, ConvParams& conv, BatchNormParams& bn, Mode mode, const Trace& tr,
                   const std::string& suffix) {
  Tensor y = tr.log("conv" + suffix, conv2d(x, conv));
  y = tr.log("bn" + suffix, batch_norm(y, bn, mode));
  return tr.log("elu" + suffix, elu(y));
}

Tensor block2_impl(const Tensor& z, Block2Params& p, Mode mode, const Trace& tr) {
  if (z.shape().c != p.pw_a.in_channels()) {
    throw ShapeError("block2 pw_a: input has " + std::to_string(z.shape().c) + " channels, expects " +
                     std::to_string(p.pw_a.in_channels()));
  }
  Tensor y = tr.log("pw_a", pointwise_conv2d(z, p.pw_a));
  y = tr.log("bn_a", batch_norm(y, p.bn_a, mode));
  y = tr.log("elu_a", elu(y));
  if (y.shape().c != p.dw.out_channels()) {
    throw ShapeError("block2 dw: " + std::to_string(y.shape().c) + " channels reach a depthwise conv over " +
                     std::to_string(p.dw.out_channels()));
  }
  y = tr.log("dw", depthwise_conv2d(y, p.dw));
  if (y.shape().c != p.pw_b.in_channels()) {
    throw ShapeError("block2 pw_b: input has " + std::to_string(y.shape().c) + " channels, expects " +
                     std::to_string(p.pw_b.in_channels()));
  }
  y = tr.log("pw_b", pointwise_conv2d(y, p.pw_b));
  y = tr.log("bn_b", batch_norm(y, p.bn_b, mode));
  return tr.log("elu_b", elu(y));
}

Tensor eru_transform_impl(const Tensor& x, EruParams& p, Mode mode, const Trace& tr) {
  if (x.shape().c != p.conv1.in_channels()) {
    throw ShapeError("eru: input has " + std::to_string(x.shape().c) + " channels, unit width is " +
                     std::to_string(p.conv1.in_channels()));
  }
  Tensor y = conv_bn_elu(x, p.conv1, p.bn1, mode, tr, "1");
  y = conv_bn_elu(y, p.conv2, p.bn2, mode, tr, "2");
  y = block2_impl(y, p.block2, mode, tr.sub("block2"));
  y = conv_bn_elu(y, p.conv3, p.bn3, mode, tr, "3");
  y = tr.log("conv4", conv2d(y, p.conv4));
  return tr.log("bn4", batch_norm(y, p.bn4, mode));
}

Tensor transition_impl(const Tensor& x, TransitionParams& p, Mode mode, const Trace& tr) {
  const Shape& s = x.shape();
  if (p.pool && (s.h < 2 || s.w < 2)) {
    throw ShapeError("stage transition: input " + to_string(s) + " too small for 2x2 pooling");
  }
  Tensor main = p.pool ? tr.log("pool", max_pool(x, 2, 2)) : x;
  if (p.align) main = tr.log("align", pointwise_conv2d(main, *p.align));
  main = tr.log("bn", batch_norm(main, p.bn, mode));
  main = tr.log("elu", elu(main));
  Tensor context = tr.log("gap", global_avg_pool(x));
  context = tr.log("shortcut", pointwise_conv2d(context, p.shortcut));
  return tr.log("add", add(main, context));
}

void check_fuse_shapes(const Tensor& x_prev, const std::optional<Tensor>& x_prev2, const Tensor& branch) {
  if (x_prev.shape() != branch.shape()) {
    throw ShapeError("encoder fuse: x_prev " + to_string(x_prev.shape()) + " does not match branch " +
                     to_string(branch.shape()));
  }
  if (x_prev2 && x_prev2->shape() != branch.shape()) {
    throw ShapeError("encoder fuse: x_prev2 " + to_string(x_prev2->shape()) + " does not match branch " +
                     to_string(branch.shape()));
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Registrar {
 public:
  explicit Registrar(std::vector<ParamEntry>& out) : out_(out) {}

  void conv(const std::string& name, ConvParams& p) {
    add(name + ".weight", p.weight, true);
    if (p.bias) add(name + ".bias", *p.bias, true);
  }
  void bn(const std::string& name, BatchNormParams& p) {
    add(name + ".gamma", p.gamma, true);
    add(name + ".beta", p.beta, true);
    add(name + ".running_mean", p.running_mean, false);
    add(name + ".running_var", p.running_var, false);
  }
  void block2(const std::string& name, Block2Params& p) {
    conv(name + ".pw_a", p.pw_a);
    bn(name + ".bn_a", p.bn_a);
    conv(name + ".dw", p.dw);
    conv(name + ".pw_b", p.pw_b);
    bn(name + ".bn_b", p.bn_b);
  }
  void eru(const std::string& name, EruParams& p) {
    conv(name + ".conv1", p.conv1);
    bn(name + ".bn1", p.bn1);
    conv(name + ".conv2", p.conv2);
    bn(name + ".bn2", p.bn2);
    block2(name + ".block2", p.block2);
    conv(name + ".conv3", p.conv3);
    bn(name + ".bn3", p.bn3);
    conv(name + ".conv4", p.conv4);
    bn(name + ".bn4", p.bn4);
  }
  void transition(const std::string& name, TransitionParams& p) {
    if (p.align) conv(name + ".align", *p.align);
    bn(name + ".bn", p.bn);
    conv(name + ".shortcut", p.shortcut);
  }
  void add(const std::string& name, Tensor& t, bool trainable) {
    t.set_requires_grad(trainable);
    out_.push_back({name, t, trainable});
  }

 private:
  std::vector<ParamEntry>& out_;
};

}  // namespace

std::vector<Tensor> Model::trainable_parameters() const {
  std::vector<Tensor> out;
  for (const auto& e : registry) {
    if (e.trainable) out.push_back(e.tensor);
  }
  return out;
}

const ParamEntry* Model::find(const std::string& name) const {
  for (const auto& e : registry) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::size_t Model::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : registry) {
    if (e.trainable) n += e.tensor.numel();
  }
  return n;
}

ConvParams make_conv(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t padding,
                     bool bias, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in * k * k)));
  std::vector<double> w(out * in * k * k);
  for (double& v : w) v = normal(rng);
  ConvParams p{Tensor({out, in, k, k}, std::move(w)), std::nullopt, stride, padding};
  if (bias) p.bias = Tensor::zeros({1, out, 1, 1});
  return p;
}

ConvParams make_depthwise(std::size_t channels, std::size_t k, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(k * k)));
  std::vector<double> w(channels * k * k);
  for (double& v : w) v = normal(rng);
  return {Tensor({channels, 1, k, k}, std::move(w)), std::nullopt, 1, (k - 1) / 2};
}

Block2Params make_block2(std::size_t in, std::size_t out, std::size_t k, std::mt19937_64& rng, double bn_eps,
                         double bn_momentum) {
  Block2Params p;
  p.pw_a = make_conv(in, in, 1, 1, 0, false, rng);
  p.bn_a = BatchNormParams::identity(in, bn_eps, bn_momentum);
  p.dw = make_depthwise(in, k, rng);
  p.pw_b = make_conv(in, out, 1, 1, 0, false, rng);
  p.bn_b = BatchNormParams::identity(out, bn_eps, bn_momentum);
  return p;
}

EruParams make_eru(std::size_t c, std::size_t k, std::mt19937_64& rng, double bn_eps, double bn_momentum) {
  const std::size_t pad = (k - 1) / 2;
  EruParams p;
  p.conv1 = make_conv(c, c, k, 1, pad, false, rng);
  p.bn1 = BatchNormParams::identity(c, bn_eps, bn_momentum);
  p.conv2 = make_conv(c, c, k, 1, pad, false, rng);
  p.bn2 = BatchNormParams::identity(c, bn_eps, bn_momentum);
  p.block2 = make_block2(c, c, k, rng, bn_eps, bn_momentum);
  p.conv3 = make_conv(c, c, k, 1, pad, false, rng);
  p.bn3 = BatchNormParams::identity(c, bn_eps, bn_momentum);
  p.conv4 = make_conv(c, c, k, 1, pad, false, rng);
  p.bn4 = BatchNormParams::identity(c, bn_eps, bn_momentum);
  std::fill(p.bn4.gamma.mutable_data().begin(), p.bn4.gamma.mutable_data().end(), 0.0);
  return p;
}

BaselineResidualParams make_baseline_residual(std::size_t c, std::size_t k, std::mt19937_64& rng, double bn_eps,
                                              double bn_momentum) {
  const std::size_t pad = (k - 1) / 2;
  BaselineResidualParams p;
  p.conv1 = make_conv(c, c, k, 1, pad, false, rng);
  p.bn1 = BatchNormParams::identity(c, bn_eps, bn_momentum);
  p.conv2 = make_conv(c, c, k, 1, pad, false, rng);
  p.bn2 = BatchNormParams::identity(c, bn_eps, bn_momentum);
  std::fill(p.bn2.gamma.mutable_data().begin(), p.bn2.gamma.mutable_data().end(), 0.0);
  return p;
}

TransitionParams make_transition(std::size_t in, std::size_t out, bool pool, std::mt19937_64& rng, double bn_eps,
                                 double bn_momentum) {
  TransitionParams p;
  p.pool = pool;
  if (in != out) p.align = make_conv(in, out, 1, 1, 0, false, rng);
  p.bn = BatchNormParams::identity(out, bn_eps, bn_momentum);
  p.shortcut = make_conv(in, out, 1, 1, 0, false, rng);
  return p;
}

Tensor block2_forward(const Tensor& z, Block2Params& p, Mode mode) { return block2_impl(z, p, mode, {}); }

Tensor eru_transform(const Tensor& x, EruParams& p, Mode mode) { return eru_transform_impl(x, p, mode, {}); }

Tensor eru_forward(const Tensor& x, EruParams& p, Mode mode) { return add(x, eru_transform(x, p, mode)); }

Tensor baseline_residual_forward(const Tensor& x, BaselineResidualParams& p, Mode mode) {
  if (x.shape().c != p.conv1.in_channels()) {
    throw ShapeError("baseline residual: input has " + std::to_string(x.shape().c) + " channels, block width is " +
                     std::to_string(p.conv1.in_channels()));
  }
  Tensor y = conv_bn_elu(x, p.conv1, p.bn1, mode, {}, "1");
  y = batch_norm(conv2d(y, p.conv2), p.bn2, mode);
  return add(x, y);
}

Tensor encoder_fuse(const Tensor& x_prev, const std::optional<Tensor>& x_prev2, const Tensor& branch_out,
                    double alpha1, double alpha2) {
  check_fuse_shapes(x_prev, x_prev2, branch_out);
  Tensor out = add(scale(x_prev, alpha1), branch_out);
  if (x_prev2) out = add(out, scale(*x_prev2, alpha2));
  return out;
}

Tensor encoder_fuse(const Tensor& x_prev, const std::optional<Tensor>& x_prev2, const Tensor& branch_out,
                    const Tensor& alpha1, const Tensor& alpha2) {
  check_fuse_shapes(x_prev, x_prev2, branch_out);
  Tensor out = add(scale_by(x_prev, alpha1), branch_out);
  if (x_prev2) out = add(out, scale_by(*x_prev2, alpha2));
  return out;
}

Tensor stage_transition(const Tensor& x, TransitionParams& p, Mode mode) { return transition_impl(x, p, mode, {}); }

Model build_model(const ModelConfig& config) {
  validate(config);
  if (config.c_max > 0 || config.k_max > 0) {
    const auto limit = [](std::size_t v) { return v > 0 ? std::uint64_t{v} : kUnbounded; };
    for (const auto& r : check_constraints(config, limit(config.c_max), limit(config.k_max))) {
      if (!r.pass) {
        throw ConfigError("constraint " + r.id + " violated: observed " + std::to_string(r.observed) + " > bound " +
                          std::to_string(r.bound));
      }
    }
  }
  Model model;
  model.config = config;
  std::mt19937_64 rng(config.seed);
  Registrar reg(model.registry);
  const double eps = config.bn_eps, mom = config.bn_momentum;

  model.stem = make_conv(config.input_shape.c, config.stem_width, 3, 1, 1, false, rng);
  model.stem_bn = BatchNormParams::identity(config.stem_width, eps, mom);
  reg.conv("stem.conv", model.stem);
  reg.bn("stem.bn", model.stem_bn);

  const auto widths = stage_widths(config);
  std::size_t width = config.stem_width;
  for (std::size_t m = 0; m < config.stages.size(); ++m) {
    const StageConfig& sc = config.stages[m];
    if (m > 0) {
      model.transitions.push_back(make_transition(width, widths[m], sc.downsample, rng, eps, mom));
      reg.transition("transition" + std::to_string(m - 1), model.transitions.back());
    }
    width = widths[m];

    StageParams stage;
    stage.width = width;
    stage.kernel = sc.kernel;
    stage.dropout_rate =
        dropout_rate_for_block(m, config.stages.size(), config.dropout_start, config.dropout_end);
    stage.alpha1 = Tensor::scalar(config.alpha1);
    stage.alpha2 = Tensor::scalar(config.alpha2);
    for (std::size_t n = 0; n < sc.num_units; ++n) {
      stage.units.push_back(make_eru(width, sc.kernel, rng, eps, mom));
    }
    model.stages.push_back(std::move(stage));
    StageParams& placed = model.stages.back();
    const std::string name = "stage" + std::to_string(m);
    for (std::size_t n = 0; n < placed.units.size(); ++n) {
      reg.eru(name + ".unit" + std::to_string(n), placed.units[n]);
    }
    if (config.alpha_learnable) {
      reg.add(name + ".alpha1", placed.alpha1, true);
      reg.add(name + ".alpha2", placed.alpha2, true);
    }
  }

  model.head = make_conv(width, config.num_classes, 1, 1, 0, true, rng);
  reg.conv("head.proj", model.head);
  return model;
}

Tensor forward(Model& model, const Tensor& batch, const ForwardOptions& options) {
  const InputShape& in = model.config.input_shape;
  const Shape& s = batch.shape();
  if (s.c != in.c || s.h != in.h || s.w != in.w) {
    throw ShapeError("stem: batch " + to_string(s) + " does not match configured input (" + std::to_string(in.c) +
                     "," + std::to_string(in.h) + "," + std::to_string(in.w) + ")");
  }
  const Trace root{options.shapes, ""};
  const Mode mode = options.mode;

  Tensor x = conv_bn_elu(batch, model.stem, model.stem_bn, mode, root.sub("stem"), "");

  for (std::size_t m = 0; m < model.stages.size(); ++m) {
    const std::string name = "stage" + std::to_string(m);
    if (m > 0) {
      x = transition_impl(x, model.transitions[m - 1], mode, root.sub("transition" + std::to_string(m - 1)));
    }
    StageParams& stage = model.stages[m];
    const Trace st = root.sub(name);
    std::optional<Tensor> prev2;
    Tensor prev = x;
    for (std::size_t n = 0; n < stage.units.size(); ++n) {
      const Trace ut = st.sub("unit" + std::to_string(n));
      Tensor branch = eru_transform_impl(prev, stage.units[n], mode, ut);
      Tensor out = model.config.alpha_learnable
                       ? encoder_fuse(prev, prev2, branch, stage.alpha1, stage.alpha2)
                       : encoder_fuse(prev, prev2, branch, model.config.alpha1, model.config.alpha2);
      ut.log("fuse", out);
      prev2 = prev;
      prev = out;
    }
    x = st.log("dropout", dropout(prev, stage.dropout_rate, mode, mix_seed(options.dropout_seed, m)));
    if (options.stage_outputs != nullptr) options.stage_outputs->push_back(x);
  }

  const Trace head = root.sub("head");
  Tensor pooled = head.log("gap", global_avg_pool(x));
  return head.log("proj", conv2d(pooled, model.head));
}

Tensor forward(Model& model, const Tensor& batch, Mode mode) {
  ForwardOptions options;
  options.mode = mode;
  return forward(model, batch, options);
}

}  // namespace adapto
