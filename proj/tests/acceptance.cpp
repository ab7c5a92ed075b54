// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "adapto/checkpoint.hpp"
#include "adapto/cost.hpp"
#include "adapto/grad_check.hpp"
#include "adapto/layers.hpp"
#include "adapto/ops.hpp"
#include "adapto/reference.hpp"
#include "adapto/schedule.hpp"
#include "adapto/train.hpp"
#include "cli.hpp"
#include "test_util.hpp"

using namespace adapto;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kGradThreshold = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr double kGradBudgetSeconds = 60.0;
constexpr int kConvCases = 240;
constexpr double kConvTolerance = 1e-10;
constexpr double kConvBudgetSeconds = 30.0;
constexpr std::uint64_t kEruExample = 4'718'592;
constexpr std::uint64_t kDwExample = 147'456;
constexpr double kParamsLo = 5.6e6, kParamsHi = 7.6e6;
constexpr double kFlopsLo = 3.9e9, kFlopsHi = 5.9e9;
constexpr double kIdentityTolerance = 1e-9;
constexpr int kLearningSeeds = 5;
constexpr std::size_t kLearningEpochs = 30;
constexpr double kLearningAccuracy = 0.95;
constexpr double kLearningBudgetSeconds = 600.0;
constexpr double kCifarSmokeAccuracy = 0.30;
constexpr int kTilingGeometries = 50;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  enum Kind { pass, fail, skip } kind;
  std::string detail;
};

int failures = 0;

void report(const std::string& id, const std::string& title, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {Outcome::fail, std::string("exception: ") + e.what()};
  }
  const char* tag = o.kind == Outcome::pass ? "PASS" : o.kind == Outcome::fail ? "FAIL" : "SKIP";
  if (o.kind == Outcome::fail) ++failures;
  std::cout << "[" << tag << "] " << id << " " << title << ": " << o.detail << std::endl;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string fixed(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 1 ----------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  using oracle::random_tensor;
  double worst = 0.0;
  std::string worst_name;
  int op_checks = 0;
  const auto check = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> params) {
    const double e = grad_check(f, params, kGradEps);
    ++op_checks;
    if (e >= worst) {
      worst = e;
      worst_name = name;
    }
  };

  Tensor x = random_tensor({2, 3, 7, 6}, rng);
  Tensor w_out = random_tensor({2, 4, 4, 3}, rng);
  ConvParams conv{random_tensor({4, 3, 3, 3}, rng), random_tensor({1, 4, 1, 1}, rng), 2, 1};
  check("conv2d", [&] { return sum(mul(conv2d(x, conv), w_out)); }, {x, conv.weight, *conv.bias});

  Tensor xs = random_tensor({2, 3, 6, 6}, rng);
  Tensor w_same = random_tensor({2, 3, 6, 6}, rng);
  ConvParams dw{random_tensor({3, 1, 5, 5}, rng), random_tensor({1, 3, 1, 1}, rng), 1, 2};
  check("depthwise", [&] { return sum(mul(depthwise_conv2d(xs, dw), w_same)); }, {xs, dw.weight, *dw.bias});
  ConvParams pw{random_tensor({3, 3, 1, 1}, rng), std::nullopt, 1, 0};
  check("pointwise", [&] { return sum(mul(pointwise_conv2d(xs, pw), w_same)); }, {xs, pw.weight});

  BatchNormParams bn = BatchNormParams::identity(3);
  bn.gamma = tensor_new({1, 3, 1, 1}, {1.2, 0.7, -0.9});
  bn.beta = tensor_new({1, 3, 1, 1}, {0.1, -0.2, 0.3});
  bn.running_var = tensor_new({1, 3, 1, 1}, {0.8, 1.3, 1.1});
  check("batch_norm/train", [&] { return sum(mul(batch_norm(xs, bn, Mode::train), w_same)); }, {xs, bn.gamma, bn.beta});
  check("batch_norm/eval", [&] { return sum(mul(batch_norm(xs, bn, Mode::eval), w_same)); }, {xs, bn.gamma, bn.beta});
  check("elu", [&] { return sum(mul(elu(xs), w_same)); }, {xs});
  Tensor w_pool = random_tensor({2, 3, 3, 3}, rng);
  check("max_pool", [&] { return sum(mul(max_pool(xs, 2, 2), w_pool)); }, {xs});
  check("avg_pool", [&] { return sum(mul(avg_pool(xs, 2, 2), w_pool)); }, {xs});
  Tensor w_gap = random_tensor({2, 3, 1, 1}, rng);
  check("global_avg_pool", [&] { return sum(mul(global_avg_pool(xs), w_gap)); }, {xs});
  check("dropout", [&] { return sum(mul(dropout(xs, 0.4, Mode::train, 5), w_same)); }, {xs});
  Tensor b = random_tensor({2, 3, 1, 1}, rng);
  check("broadcast add", [&] { return sum(mul(add(xs, b), w_same)); }, {xs, b});
  Tensor a1 = Tensor::scalar(0.9), a2 = Tensor::scalar(1.1);
  Tensor ys = random_tensor({2, 3, 6, 6}, rng), ts = random_tensor({2, 3, 6, 6}, rng);
  check("encoder fuse", [&] { return sum(mul(encoder_fuse(xs, ys, ts, a1, a2), w_same)); }, {xs, ys, ts, a1, a2});
  Tensor logits = random_tensor({3, 5, 1, 1}, rng);
  const std::vector<int> labels{4, 0, 2};
  check("softmax_cross_entropy", [&] { return softmax_cross_entropy(logits, labels); }, {logits});

  // Full mini preset, every trainable coordinate, train mode.
  Model model = build_model(preset("mini"));
  std::normal_distribution<double> nd;
  for (auto& e : model.registry) {
    if (e.name.ends_with(".gamma")) {
      for (double& v : e.tensor.mutable_data()) v = 1.0 + 0.3 * nd(rng);
    } else if (e.name.ends_with(".beta")) {
      for (double& v : e.tensor.mutable_data()) v = 0.1 * nd(rng);
    }
  }
  const Tensor input = random_tensor({1, 3, 16, 16}, rng);
  const std::vector<int> label{1};
  std::vector<NamedTensor> params;
  for (const auto& e : model.registry) {
    if (e.trainable) params.push_back({e.name, e.tensor});
  }
  const GradCheckResult full = grad_check(
      [&] {
        ForwardOptions o;
        o.mode = Mode::train;
        o.dropout_seed = 3;
        return softmax_cross_entropy(forward(model, input, o), label);
      },
      params);
  if (full.max_relative_error >= worst) {
    worst = full.max_relative_error;
    worst_name = "mini preset";
  }

  const double elapsed = seconds_since(t0);
  const bool ok = worst < kGradThreshold && elapsed < kGradBudgetSeconds;
  return {ok ? Outcome::pass : Outcome::fail,
          "max rel err " + sci(worst) + " (" + worst_name + ") < " + sci(kGradThreshold) + " over " + std::to_string(op_checks) + " op checks + " +
              std::to_string(full.coordinates) + " mini-preset coordinates; " + fixed(elapsed, 1) + " s < " +
              fixed(kGradBudgetSeconds, 0) + " s"};
}

// 2 ----------------------------------------------------------------------

Outcome convolution_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> n(1, 2), c(1, 4), e(1, 9), s(1, 2), p(0, 3);
  const std::size_t ks[] = {1, 3, 5, 7};
  double worst = 0.0;
  int cases = 0;
  while (cases < kConvCases) {
    const std::size_t k = ks[cases % 4];
    const std::size_t h = e(rng), w = e(rng), stride = s(rng), pad = p(rng);
    if (h + 2 * pad < k || w + 2 * pad < k) continue;
    const Tensor x = oracle::random_tensor({n(rng), c(rng), h, w}, rng);
    const std::size_t cout = c(rng);
    ConvParams cp{oracle::random_tensor({cout, x.shape().c, k, k}, rng), oracle::random_tensor({1, cout, 1, 1}, rng),
                  stride, pad};
    const Tensor y = conv2d(x, cp);
    worst = std::max(worst, oracle::max_abs_diff(y.data(), oracle::conv_oracle(x, cp.weight, cp.bias->values(), stride, pad)));
    ++cases;
  }
  const double elapsed = seconds_since(t0);
  const bool ok = worst < kConvTolerance && elapsed < kConvBudgetSeconds;
  return {ok ? Outcome::pass : Outcome::fail, std::to_string(cases) + " cases, max |diff| " + sci(worst) + " < " +
                                                  sci(kConvTolerance) + "; " + fixed(elapsed, 2) + " s"};
}

// 3 ----------------------------------------------------------------------

Outcome cost_exactness() {
  const ModelConfig config = preset("mini");
  Model model = build_model(config);
  std::mt19937_64 rng(3);
  const Tensor x = oracle::random_tensor({1, 3, 16, 16}, rng);
  std::uint64_t macs = 0;
  {
    reference::ReferenceScope scope(&macs);
    (void)forward(model, x, Mode::eval);
  }
  const CostReport r = analyze(config);
  const std::uint64_t eru = eru_flops(32, 32, 16, 3);
  const std::uint64_t dw = dwconv_flops(32, 32, 16, 3);
  const bool ok = r.conv_flops == 2 * macs && eru == kEruExample && dw == kDwExample && eru == 32 * dw;
  return {ok ? Outcome::pass : Outcome::fail, "analyzer conv FLOPs " + std::to_string(r.conv_flops) +
                                                  " = 2 x instrumented MACs " + std::to_string(macs) +
                                                  "; ERU(32,32,16,3) = " + std::to_string(eru) +
                                                  ", depthwise = " + std::to_string(dw) + " (ratio 1/32)"};
}

// 4 ----------------------------------------------------------------------

Outcome calibration() {
  const CostReport r = analyze(preset("cifar-32"));
  const double params = static_cast<double>(r.total_params);
  const double flops = static_cast<double>(r.total_flops);
  const bool ok = params >= kParamsLo && params <= kParamsHi && flops >= kFlopsLo && flops <= kFlopsHi;
  return {ok ? Outcome::pass : Outcome::fail, "cifar-32 params " + fixed(params / 1e6, 3) + " M in [5.6, 7.6], FLOPs " +
                                                  fixed(flops / 1e9, 3) + " G in [3.9, 5.9]"};
}

// 5 ----------------------------------------------------------------------

double skip_only_mismatch(Model& model, const Tensor& x, bool with_shortcut) {
  std::vector<Tensor> stages;
  ForwardOptions opts;
  opts.stage_outputs = &stages;
  (void)forward(model, x, opts);

  double worst = 0.0;
  Tensor h = elu(batch_norm(conv2d(x, model.stem), model.stem_bn, Mode::eval));
  for (std::size_t s = 0; s < model.stages.size(); ++s) {
    if (s > 0) {
      TransitionParams& t = model.transitions[s - 1];
      Tensor main = t.pool ? max_pool(h, 2, 2) : h;
      if (t.align) main = pointwise_conv2d(main, *t.align);
      main = elu(batch_norm(main, t.bn, Mode::eval));
      h = with_shortcut ? add(main, pointwise_conv2d(global_avg_pool(h), t.shortcut)) : main;
    }
    std::optional<Tensor> prev2;
    for (std::size_t n = 0; n < model.stages[s].units.size(); ++n) {
      Tensor next = scale(h, model.config.alpha1);
      if (prev2) next = add(next, scale(*prev2, model.config.alpha2));
      prev2 = h;
      h = next;
    }
    worst = std::max(worst, oracle::max_abs_diff(stages[s].data(), h.data()));
  }
  return worst;
}

Outcome residual_identity() {
  std::mt19937_64 rng(5);
  const Tensor x = oracle::random_tensor({2, 3, 16, 16}, rng);
  ModelConfig deep = preset("mini");
  for (auto& st : deep.stages) st.num_units = 3;
  double worst = 0.0;
  for (const ModelConfig& config : {preset("mini"), deep}) {
    Model fresh = build_model(config);
    worst = std::max(worst, skip_only_mismatch(fresh, x, true));
    Model zeroed = build_model(config);
    for (auto& t : zeroed.transitions) t.shortcut.weight = Tensor::zeros(t.shortcut.weight.shape());
    worst = std::max(worst, skip_only_mismatch(zeroed, x, false));
  }
  return {worst < kIdentityTolerance ? Outcome::pass : Outcome::fail,
          "max |stage map - skip-only map| " + sci(worst) + " < " + sci(kIdentityTolerance) +
              " (mini and 3-unit variant, shortcut live and zeroed)"};
}

// 6 ----------------------------------------------------------------------

struct CsvRow {
  double train_loss = 0.0, train_acc = 0.0;
};

std::vector<CsvRow> read_metrics(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::vector<double> v;
    while (std::getline(ss, field, ',')) v.push_back(std::stod(field));
    rows.push_back({v.at(1), v.at(2)});
  }
  return rows;
}

double parse_accuracy(const std::string& out) {
  const auto pos = out.find("accuracy ");
  return pos == std::string::npos ? -1.0 : std::stod(out.substr(pos + 9));
}

Outcome desk_learning(const fs::path& scratch) {
  const auto t0 = Clock::now();
  std::string detail = "test acc per seed:";
  bool ok = true;
  for (int seed = 0; seed < kLearningSeeds; ++seed) {
    const fs::path out = scratch / ("learn" + std::to_string(seed));
    std::ostringstream so, se;
    const std::string s = std::to_string(seed);
    const int code = cli::run({"train", "--preset", "mini", "--data", "synthetic", "--epochs",
                               std::to_string(kLearningEpochs), "--seed", s, "--data-seed", std::to_string(100 * seed),
                               "--train-size", "400", "--test-size", "100", "--lr0", "0.0175", "--out", out.string()},
                              so, se);
    if (code != 0) return {Outcome::fail, "train exited " + std::to_string(code) + ": " + se.str()};
    const auto rows = read_metrics(out / "metrics.csv");
    std::ostringstream eo, ee;
    const int ecode = cli::run({"eval", "--checkpoint", (out / "checkpoint.avck").string(), "--data", "synthetic",
                                "--data-seed", std::to_string(100 * seed), "--test-size", "100"},
                               eo, ee);
    const double acc = parse_accuracy(eo.str());
    const bool seed_ok = ecode == 0 && rows.size() == kLearningEpochs && acc >= kLearningAccuracy &&
                         rows.back().train_acc >= kLearningAccuracy && rows[10].train_loss < rows[0].train_loss;
    ok = ok && seed_ok;
    detail += " " + fixed(acc, 2) + (seed_ok ? "" : "(!)");
  }
  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < kLearningBudgetSeconds;
  return {ok ? Outcome::pass : Outcome::fail,
          detail + " >= " + fixed(kLearningAccuracy, 2) + "; loss(epoch 10) < loss(epoch 0); " + fixed(elapsed, 0) +
              " s < " + fixed(kLearningBudgetSeconds, 0) + " s"};
}

Outcome cifar_smoke(const fs::path& scratch) {
  const char* dir = std::getenv("CIFAR10_DIR");
  if (dir == nullptr || !fs::exists(fs::path(dir) / "data_batch_1.bin")) {
    return {Outcome::skip, "CIFAR10_DIR not set or missing data_batch_1.bin"};
  }
  ModelConfig c = preset("cifar-32");
  c.stem_width = 16;
  c.stages = {{Phase::hold, 1, 3, false}, {Phase::expansion, 1, 3, true}, {Phase::expansion, 1, 3, true}};
  save_config(c, (scratch / "cifar_small.json").string());
  const fs::path out = scratch / "cifar";
  std::ostringstream so, se;
  const int code = cli::run({"train", "--config", (scratch / "cifar_small.json").string(), "--data", dir, "--limit",
                             "2000", "--epochs", "5", "--lr0", "0.035", "--out", out.string()},
                            so, se);
  if (code != 0) return {Outcome::fail, "train exited " + std::to_string(code) + ": " + se.str()};
  std::ostringstream eo, ee;
  (void)cli::run({"eval", "--checkpoint", (out / "checkpoint.avck").string(), "--data", dir}, eo, ee);
  const double acc = parse_accuracy(eo.str());
  return {acc > kCifarSmokeAccuracy ? Outcome::pass : Outcome::fail,
          "CIFAR-10 test accuracy " + fixed(acc, 3) + " > " + fixed(kCifarSmokeAccuracy, 2)};
}

// 7 ----------------------------------------------------------------------

Outcome schedule_fidelity() {
  const TrainConfig cfg;
  const double lr0 = lr_at(0.0, cfg), lr1 = lr_at(12.4, cfg);
  const Model m = build_model(preset("cifar-32"));
  bool monotone = true;
  for (std::size_t i = 1; i < m.stages.size(); ++i) monotone = monotone && m.stages[i].dropout_rate >= m.stages[i - 1].dropout_rate;
  const double first = m.stages.front().dropout_rate, last = m.stages.back().dropout_rate;
  const bool ok = lr0 == 0.175 && lr1 == 0.17325 && monotone && first == 0.3 && last == 0.5;
  std::ostringstream os;
  os << "lr_at(0) = " << lr0 << ", lr_at(12.4) = " << lr1 << "; dropout " << first << " -> " << last
     << (monotone ? " non-decreasing" : " NOT monotone");
  return {ok ? Outcome::pass : Outcome::fail, os.str()};
}

// 8 ----------------------------------------------------------------------

Outcome determinism(const fs::path& scratch) {
  std::string bytes[2][2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = scratch / ("det" + std::to_string(run));
    std::ostringstream so, se;
    const int code = cli::run({"train", "--preset", "mini", "--epochs", "3", "--seed", "42", "--train-size", "120",
                               "--test-size", "40", "--augment", "none", "--out", out.string()},
                              so, se);
    if (code != 0) return {Outcome::fail, "train exited " + std::to_string(code)};
    bytes[run][0] = slurp(out / "metrics.csv");
    bytes[run][1] = slurp(out / "checkpoint.avck");
  }
  const bool ok = bytes[0][0] == bytes[1][0] && bytes[0][1] == bytes[1][1] && !bytes[0][1].empty();
  return {ok ? Outcome::pass : Outcome::fail, "metrics.csv (" + std::to_string(bytes[0][0].size()) +
                                                  " B) and checkpoint (" + std::to_string(bytes[0][1].size()) +
                                                  " B) byte-identical across two runs"};
}

// 9 ----------------------------------------------------------------------

Outcome tiling_and_loader() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> label(0, 9);
  Dataset fixture;
  for (int i = 0; i < 20; ++i) fixture.push_back({oracle::uniform_tensor({1, 3, 32, 32}, rng, 0.0, 1.0), label(rng)});
  const Dataset back = parse_cifar10_binary(encode_cifar10_binary(fixture));
  bool round_trip = back.size() == fixture.size();
  for (std::size_t i = 0; round_trip && i < fixture.size(); ++i) {
    round_trip = back[i].label == fixture[i].label &&
                 oracle::max_abs_diff(back[i].pixels.data(), fixture[i].pixels.data()) <= 0.5 / 255.0 + 1e-12;
  }

  std::uniform_int_distribution<std::size_t> ext(1, 40);
  int matched = 0;
  for (int g = 0; g < kTilingGeometries; ++g) {
    const std::size_t h = ext(rng), w = ext(rng), th = 1 + ext(rng) % h, tw = 1 + ext(rng) % w, step = 1 + ext(rng) % 8;
    const Tensor x = oracle::random_tensor({1, 1, h, w}, rng);
    std::vector<std::pair<std::size_t, std::size_t>> windows;
    for (std::size_t r = 0; r + th <= h; ++r)
      for (std::size_t c = 0; c + tw <= w; ++c) {
        const bool row = r % step == 0 || r + th == h;
        const bool col = c % step == 0 || c + tw == w;
        if (row && col) windows.emplace_back(r, c);
      }
    const auto tiles = tile_image(x, th, tw, step);
    bool same = tiles.size() == windows.size();
    for (std::size_t t = 0; same && t < tiles.size(); ++t) {
      const auto [r, c] = windows[t];
      for (std::size_t i = 0; same && i < th; ++i)
        for (std::size_t j = 0; same && j < tw; ++j) same = tiles[t].at(0, 0, i, j) == x.at(0, 0, r + i, c + j);
    }
    matched += same;
  }
  const bool ok = round_trip && matched == kTilingGeometries;
  return {ok ? Outcome::pass : Outcome::fail, std::string("CIFAR round-trip ") + (round_trip ? "exact labels, pixels within 1/510" : "FAILED") +
                                                  "; " + std::to_string(matched) + "/" +
                                                  std::to_string(kTilingGeometries) + " geometries match brute force"};
}

}  // namespace

int main() {
  const fs::path scratch = fs::temp_directory_path() / "adapto_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  report("1", "gradient correctness", gradient_correctness);
  report("2", "convolution oracle equivalence", convolution_oracle);
  report("3", "cost-model exactness", cost_exactness);
  report("4", "complexity calibration", calibration);
  report("5", "residual identity at initialization", residual_identity);
  report("6", "desk-scale learning", [&] { return desk_learning(scratch); });
  report("6b", "CIFAR-10 smoke check", [&] { return cifar_smoke(scratch); });
  report("7", "schedule fidelity", schedule_fidelity);
  report("8", "training determinism", [&] { return determinism(scratch); });
  report("9", "tiling and loader", tiling_and_loader);

  fs::remove_all(scratch);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
