#include "adapto/cost.hpp"

#include <iomanip>
#include <sstream>

#include "adapto/errors.hpp"

namespace adapto {

namespace {

void require_positive(std::uint64_t h, std::uint64_t w, std::uint64_t c, std::uint64_t k, const char* fn) {
  if (h < 1 || w < 1 || c < 1 || k < 1) throw ArgumentError(std::string(fn) + ": all arguments must be >= 1");
}

// Walks a topology layer by layer, tracking the current (C, H, W).
class Analyzer {
 public:
  explicit Analyzer(CostReport& report) : report_(report) {}

  Shape shape{1, 0, 0, 0};

  void conv(const std::string& name, std::uint64_t out, std::uint64_t k, std::uint64_t stride, std::uint64_t pad,
            bool bias) {
    const std::uint64_t cin = shape.c;
    shape = {1, out, (shape.h + 2 * pad - k) / stride + 1, (shape.w + 2 * pad - k) / stride + 1};
    const std::uint64_t pix = shape.h * shape.w;
    const std::uint64_t macs = pix * out * cin * k * k;
    push(name, "conv", out * cin * k * k + (bias ? out : 0), macs, 2 * macs + (bias ? pix * out : 0));
  }
  std::uint64_t depthwise(const std::string& name, std::uint64_t k) {
    const std::uint64_t pad = (k - 1) / 2;
    shape = {1, shape.c, shape.h + 2 * pad - k + 1, shape.w + 2 * pad - k + 1};
    const std::uint64_t macs = shape.h * shape.w * shape.c * k * k;
    push(name, "depthwise", shape.c * k * k, macs, 2 * macs);
    return macs;
  }
  void bn(const std::string& name) { push(name, "batch_norm", 2 * shape.c, 0, 2 * elements()); }
  void elu(const std::string& name) { push(name, "elu", 0, 0, elements()); }
  void max_pool(const std::string& name) {
    shape = {1, shape.c, (shape.h - 2) / 2 + 1, (shape.w - 2) / 2 + 1};
    push(name, "max_pool", 0, 0, 3 * elements());
  }
  void gap(const std::string& name) {
    const std::uint64_t in = elements();
    shape = {1, shape.c, 1, 1};
    push(name, "global_avg_pool", 0, 0, in);
  }
  void elementwise(const std::string& name, const char* kind, std::uint64_t ops_per_element,
                   std::uint64_t params = 0) {
    push(name, kind, params, 0, ops_per_element * elements());
  }

  [[nodiscard]] std::uint64_t elements() const { return shape.c * shape.h * shape.w; }
  [[nodiscard]] std::size_t mark() const { return report_.per_layer.size(); }
  [[nodiscard]] std::uint64_t flops_since(std::size_t mark) const {
    std::uint64_t f = 0;
    for (std::size_t i = mark; i < report_.per_layer.size(); ++i) f += report_.per_layer[i].flops;
    return f;
  }

 private:
  void push(const std::string& name, const char* kind, std::uint64_t params, std::uint64_t macs,
            std::uint64_t flops) {
    report_.per_layer.push_back({name, kind, params, macs, flops, shape});
  }
  CostReport& report_;
};

std::string shape_text(const Shape& s) {
  std::ostringstream os;
  os << s.n << 'x' << s.c << 'x' << s.h << 'x' << s.w;
  return os.str();
}

}  // namespace

std::uint64_t eru_flops(std::uint64_t h, std::uint64_t w, std::uint64_t c, std::uint64_t k) {
  require_positive(h, w, c, k, "eru_flops");
  return 2 * h * w * c * c * k * k;
}

std::uint64_t dwconv_flops(std::uint64_t h, std::uint64_t w, std::uint64_t c, std::uint64_t k) {
  require_positive(h, w, c, k, "dwconv_flops");
  return h * w * c * k * k;
}

CostReport analyze(const ModelConfig& config, std::uint64_t c_max, std::uint64_t k_max) {
  validate(config);
  CostReport report;
  Analyzer a(report);
  a.shape = {1, config.input_shape.c, config.input_shape.h, config.input_shape.w};

  a.conv("stem.conv", config.stem_width, 3, 1, 1, false);
  a.bn("stem.bn");
  a.elu("stem.elu");

  const auto widths = stage_widths(config);
  for (std::size_t m = 0; m < config.stages.size(); ++m) {
    const StageConfig& sc = config.stages[m];
    if (m > 0) {
      const std::string t = "transition" + std::to_string(m - 1);
      const Shape in = a.shape;
      if (sc.downsample) a.max_pool(t + ".pool");
      if (in.c != widths[m]) a.conv(t + ".align", widths[m], 1, 1, 0, false);
      a.bn(t + ".bn");
      a.elu(t + ".elu");
      const Shape main = a.shape;
      a.shape = in;
      a.gap(t + ".gap");
      a.conv(t + ".shortcut", widths[m], 1, 1, 0, false);
      a.shape = main;
      a.elementwise(t + ".add", "add", 1);
    }

    const std::string stage = "stage" + std::to_string(m);
    const std::uint64_t c = widths[m], k = sc.kernel, pad = (sc.kernel - 1) / 2;
    for (std::size_t n = 0; n < sc.num_units; ++n) {
      const std::string u = stage + ".unit" + std::to_string(n);
      const std::size_t start = a.mark();
      UnitCost unit{u, a.shape.h, a.shape.w, c, k};
      for (const char* i : {"1", "2"}) {
        a.conv(u + ".conv" + i, c, k, 1, pad, false);
        a.bn(u + ".bn" + i);
        a.elu(u + ".elu" + i);
      }
      a.conv(u + ".block2.pw_a", c, 1, 1, 0, false);
      a.bn(u + ".block2.bn_a");
      a.elu(u + ".block2.elu_a");
      unit.depthwise_macs = a.depthwise(u + ".block2.dw", k);
      a.conv(u + ".block2.pw_b", c, 1, 1, 0, false);
      a.bn(u + ".block2.bn_b");
      a.elu(u + ".block2.elu_b");
      a.conv(u + ".conv3", c, k, 1, pad, false);
      a.bn(u + ".bn3");
      a.elu(u + ".elu3");
      a.conv(u + ".conv4", c, k, 1, pad, false);
      a.bn(u + ".bn4");
      // alpha1*x + branch, plus alpha2*x2 after the first unit: one multiply and one add per term.
      a.elementwise(u + ".fuse", "fuse", n == 0 ? 2 : 4);
      unit.exact_flops = a.flops_since(start);
      unit.formula_flops = eru_flops(unit.h, unit.w, c, k);
      unit.depthwise_formula = dwconv_flops(unit.h, unit.w, c, k);
      report.units.push_back(unit);
    }
    if (config.alpha_learnable) {
      report.per_layer.push_back({stage + ".alpha", "fuse_weights", 2, 0, 0, a.shape});
    }
    a.elementwise(stage + ".dropout", "dropout", 0);
  }

  a.gap("head.gap");
  a.conv("head.proj", config.num_classes, 1, 1, 0, true);

  for (const auto& l : report.per_layer) {
    report.total_params += l.params;
    report.total_flops += l.flops;
    report.conv_macs += l.macs;
  }
  report.conv_flops = 2 * report.conv_macs;
  for (const auto& u : report.units) report.formula_total_flops += u.formula_flops;
  report.constraints = check_constraints(config, c_max, k_max);
  return report;
}

CostReport analyze(const Model& model, std::uint64_t c_max, std::uint64_t k_max) {
  return analyze(model.config, c_max, k_max);
}

std::uint64_t total_flops(const Model& model) { return analyze(model).total_flops; }

std::uint64_t param_count(const Model& model) { return model.trainable_count(); }

std::vector<ConstraintResult> check_constraints(const ModelConfig& config, std::uint64_t c_max,
                                                std::uint64_t k_max) {
  const auto widths = stage_widths(config);
  std::size_t max_units = 0;
  for (const auto& s : config.stages) max_units = std::max(max_units, s.num_units);

  std::vector<ConstraintResult> out;
  for (std::size_t n = 0; n < max_units; ++n) {
    std::uint64_t sum = 0;
    for (std::size_t m = 0; m < config.stages.size(); ++m) {
      if (n < config.stages[m].num_units) sum += widths[m];
    }
    out.push_back({"channels[unit " + std::to_string(n) + "]", c_max, sum, sum <= c_max});
  }
  for (std::size_t m = 0; m < config.stages.size(); ++m) {
    const std::uint64_t sum = config.stages[m].num_units * config.stages[m].kernel;
    out.push_back({"kernels[stage " + std::to_string(m) + "]", k_max, sum, sum <= k_max});
  }
  return out;
}

std::vector<ConstraintResult> check_constraints(const Model& model, std::uint64_t c_max, std::uint64_t k_max) {
  return check_constraints(model.config, c_max, k_max);
}

CostReport analyze_baseline_residual(std::uint64_t h, std::uint64_t w, std::uint64_t c, std::uint64_t k) {
  require_positive(h, w, c, k, "analyze_baseline_residual");
  CostReport report;
  Analyzer a(report);
  a.shape = {1, c, h, w};
  const std::uint64_t pad = (k - 1) / 2;
  a.conv("conv1", c, k, 1, pad, false);
  a.bn("bn1");
  a.elu("elu1");
  a.conv("conv2", c, k, 1, pad, false);
  a.bn("bn2");
  a.elementwise("add", "add", 1);
  for (const auto& l : report.per_layer) {
    report.total_params += l.params;
    report.total_flops += l.flops;
    report.conv_macs += l.macs;
  }
  report.conv_flops = 2 * report.conv_macs;
  report.formula_total_flops = eru_flops(h, w, c, k);
  return report;
}

std::vector<BaselineRow> compare_baselines(const Model& model) {
  const CostReport r = analyze(model);
  return {
      {"ResNet-18", 768.0, 11.7, "published constant, as printed in source", true},
      {"MobileNetV2", 115.2, 3.4, "published constant, as printed in source", true},
      {"This model", static_cast<double>(r.total_flops) / 1e9, static_cast<double>(param_count(model)) / 1e6,
       "computed by the analyzer", false},
  };
}

std::string format_report(const CostReport& report, const std::vector<BaselineRow>& baselines) {
  std::ostringstream os;
  os << std::left << std::setw(34) << "layer" << std::right << std::setw(12) << "params" << std::setw(16) << "flops"
     << "  out_shape\n";
  for (const auto& l : report.per_layer) {
    os << std::left << std::setw(34) << l.name << std::right << std::setw(12) << l.params << std::setw(16) << l.flops
       << "  " << shape_text(l.output_shape) << '\n';
  }
  os << std::left << std::setw(34) << "TOTAL" << std::right << std::setw(12) << report.total_params << std::setw(16)
     << report.total_flops << '\n';
  os << std::fixed << std::setprecision(3);
  os << "\nparams: " << static_cast<double>(report.total_params) / 1e6 << " M\n";
  os << "flops: " << static_cast<double>(report.total_flops) / 1e9 << " G (conv " << report.conv_macs
     << " MACs = " << report.conv_flops << " FLOPs)\n";

  os << "\nper-unit cost: closed form 2*h*w*c^2*k^2 vs exact layer sum; depthwise h*w*c*k^2\n";
  for (const auto& u : report.units) {
    os << "  " << u.name << " h=" << u.h << " w=" << u.w << " c=" << u.c << " k=" << u.k
       << " formula=" << u.formula_flops << " exact=" << u.exact_flops << " depthwise=" << u.depthwise_formula
       << '\n';
  }
  os << "  sum of closed-form unit figures: " << report.formula_total_flops << '\n';

  os << "\nconstraints:\n";
  for (const auto& c : report.constraints) {
    os << "  " << std::left << std::setw(22) << c.id << std::right << " observed " << c.observed << " bound ";
    if (c.bound == kUnbounded) {
      os << "none";
    } else {
      os << c.bound;
    }
    os << (c.pass ? "  pass" : "  FAIL") << '\n';
  }

  os << "\n" << std::left << std::setw(14) << "model" << std::right << std::setw(12) << "FLOPs (G)" << std::setw(12)
     << "params (M)" << "  remark\n";
  for (const auto& b : baselines) {
    os << std::left << std::setw(14) << b.model << std::right << std::setw(12) << b.gflops << std::setw(12)
       << b.mparams << "  " << b.remark << '\n';
  }
  os << "note: the published baseline FLOPs are reproduced as printed; they disagree with common figures for\n"
        "these networks by about two orders of magnitude and their stated input size is ambiguous.\n";
  return os.str();
}

std::string report_csv(const CostReport& report) {
  std::ostringstream os;
  os << "name,params,flops,out_shape\n";
  for (const auto& l : report.per_layer) {
    os << l.name << ',' << l.params << ',' << l.flops << ',' << shape_text(l.output_shape) << '\n';
  }
  return os.str();
}

}  // namespace adapto
