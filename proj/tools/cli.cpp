#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "adapto/checkpoint.hpp"
#include "adapto/cost.hpp"
#include "adapto/errors.hpp"
#include "adapto/grad_check.hpp"
#include "adapto/layers.hpp"
#include "adapto/model.hpp"
#include "adapto/train.hpp"

namespace adapto::cli {

namespace fs = std::filesystem;

namespace {

struct ModelSource {
  std::string config_path;
  std::string preset_name;
};

ModelConfig resolve_config(const ModelSource& src, const std::string& fallback_preset) {
  if (!src.config_path.empty()) return load_config(src.config_path);
  return preset(src.preset_name.empty() ? fallback_preset : src.preset_name);
}

void add_model_source(CLI::App* cmd, ModelSource& src) {
  auto* c = cmd->add_option("--config", src.config_path, "Model config JSON");
  auto* p = cmd->add_option("--preset", src.preset_name, "Named preset (cifar-32, cifar-64, mini)");
  c->excludes(p);
}

struct DataOptions {
  std::string source = "synthetic";
  std::uint64_t data_seed = 0;
  std::size_t train_size = 400;
  std::size_t test_size = 100;
  std::size_t limit = 0;
};

void add_data_options(CLI::App* cmd, DataOptions& d, bool with_train) {
  cmd->add_option("--data", d.source, "CIFAR-10 binary directory, or 'synthetic'");
  cmd->add_option("--data-seed", d.data_seed, "Synthetic generator seed");
  if (with_train) cmd->add_option("--train-size", d.train_size, "Synthetic training images");
  cmd->add_option("--test-size", d.test_size, "Synthetic evaluation images");
  cmd->add_option("--limit", d.limit, "Use at most this many images per split (0 = all)");
}

void truncate(Dataset& d, std::size_t limit) {
  if (limit > 0 && d.size() > limit) d.resize(limit);
}

void require_cifar_shape(const ModelConfig& config) {
  const InputShape& in = config.input_shape;
  if (in.c != 3 || in.h != 32 || in.w != 32 || config.num_classes != 10) {
    throw DataError("CIFAR-10 data needs a config with input (3,32,32) and 10 classes");
  }
}

Dataset synthetic_for(const ModelConfig& config, std::size_t n, std::uint64_t seed) {
  if (config.input_shape.h != config.input_shape.w) {
    throw DataError("synthetic data needs a square input shape");
  }
  return synthetic_dataset(n, config.num_classes, config.input_shape.h, seed, config.input_shape.c);
}

Dataset load_cifar_split(const fs::path& dir, bool train) {
  if (!fs::is_directory(dir)) throw DataError("data directory not found: " + dir.string());
  Dataset all;
  std::vector<fs::path> files;
  if (train) {
    for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  } else {
    files.push_back(dir / "test_batch.bin");
  }
  for (const auto& f : files) {
    if (!fs::exists(f)) continue;
    Dataset part = load_cifar10_binary(f.string());
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (all.empty()) throw DataError("no CIFAR-10 " + std::string(train ? "training" : "test") + " batches in " + dir.string());
  return all;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string layer_of(const std::string& param) {
  const auto dot = param.rfind('.');
  return dot == std::string::npos ? param : param.substr(0, dot);
}

// describe -----------------------------------------------------------------

int cmd_describe(const ModelSource& src, const std::string& csv_path, std::ostream& out, std::ostream& err) {
  if (src.config_path.empty() && src.preset_name.empty()) {
    err << "describe: one of --config or --preset is required\n";
    return kUsage;
  }
  const ModelConfig config = resolve_config(src, "");
  const auto bound = [](std::size_t v) { return v > 0 ? std::uint64_t{v} : kUnbounded; };
  const CostReport report = analyze(config, bound(config.c_max), bound(config.k_max));

  std::vector<BaselineRow> baselines;
  bool constraints_ok = std::all_of(report.constraints.begin(), report.constraints.end(),
                                    [](const ConstraintResult& c) { return c.pass; });
  if (constraints_ok) {
    const Model model = build_model(config);
    baselines = compare_baselines(model);
  }
  out << format_report(report, baselines);
  if (!csv_path.empty()) {
    std::ofstream f(csv_path);
    if (!f) throw DataError("cannot write " + csv_path);
    f << report_csv(report);
  }
  if (!constraints_ok) {
    for (const auto& c : report.constraints) {
      if (!c.pass) err << "constraint " << c.id << " violated: " << c.observed << " > " << c.bound << '\n';
    }
    return kUsage;
  }
  return kOk;
}

// gradcheck ----------------------------------------------------------------

int cmd_gradcheck(const std::string& preset_name, double eps, double threshold, std::size_t max_coords,
                  std::ostream& out, std::ostream& err) {
  if (!(eps > 0.0)) {
    err << "gradcheck: --eps must be positive\n";
    return kUsage;
  }
  if (!(threshold >= 0.0)) {
    err << "gradcheck: --threshold must be non-negative\n";
    return kUsage;
  }
  const ModelConfig config = miniature(preset(preset_name));
  Model model = build_model(config);

  // Non-trivial affine parameters so every branch carries gradient.
  std::mt19937_64 rng(config.seed + 17);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& e : model.registry) {
    if (!e.trainable) continue;
    const bool gamma = e.name.ends_with(".gamma");
    const bool beta = e.name.ends_with(".beta");
    if (!gamma && !beta) continue;
    for (auto& v : e.tensor.mutable_data()) v = gamma ? 1.0 + 0.3 * normal(rng) : 0.1 * normal(rng);
  }

  const InputShape& in = config.input_shape;
  Tensor x = Tensor::zeros({2, in.c, in.h, in.w});
  for (auto& v : x.mutable_data()) v = normal(rng);
  const std::vector<int> labels{0, static_cast<int>(1 % config.num_classes)};

  std::vector<NamedTensor> params;
  for (const auto& e : model.registry) {
    if (e.trainable) params.push_back({e.name, e.tensor});
  }
  const auto loss = [&] {
    ForwardOptions opts;
    opts.mode = Mode::train;
    opts.dropout_seed = 11;
    return softmax_cross_entropy(forward(model, x, opts), labels);
  };
  GradCheckOptions options;
  options.eps = eps;
  options.max_coords_per_tensor = max_coords;
  const GradCheckResult result = grad_check(loss, params, options);

  std::map<std::string, double> per_layer;
  std::vector<std::string> order;
  for (const auto& [name, e] : result.per_tensor) {
    const std::string layer = layer_of(name);
    if (!per_layer.contains(layer)) order.push_back(layer);
    per_layer[layer] = std::max(per_layer[layer], e);
  }
  out << std::left << std::setw(36) << "layer" << "max_rel_error\n";
  std::vector<std::string> offending;
  for (const auto& layer : order) {
    const double e = per_layer[layer];
    out << std::left << std::setw(36) << layer << std::scientific << std::setprecision(3) << e << '\n';
    if (!(e < threshold)) offending.push_back(layer);
  }
  out << std::defaultfloat;
  out << "coordinates checked: " << result.coordinates << '\n';
  out << "max relative error: " << std::scientific << std::setprecision(3) << result.max_relative_error
      << std::defaultfloat << " (threshold " << threshold << ")\n";
  if (!offending.empty()) {
    err << "gradcheck failed for " << offending.size() << " layer(s):";
    for (const auto& l : offending) err << ' ' << l;
    err << '\n';
    return kCheckFailed;
  }
  return kOk;
}

// train / eval -------------------------------------------------------------

struct TrainFlags {
  std::size_t epochs = 30;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<double> lr0;
  std::size_t batch_size = 16;
  std::string augment = "none";
};

int cmd_train(const ModelSource& src, const DataOptions& data, const TrainFlags& flags, std::ostream& out,
              std::ostream& err) {
  ModelConfig config = resolve_config(src, "mini");
  if (flags.seed) config.seed = *flags.seed;
  validate(config);

  Dataset train_set, val_set;
  if (data.source == "synthetic") {
    train_set = synthetic_for(config, data.train_size, data.data_seed);
    val_set = synthetic_for(config, data.test_size, data.data_seed + 1);
  } else {
    require_cifar_shape(config);
    train_set = load_cifar_split(data.source, true);
    val_set = load_cifar_split(data.source, false);
    truncate(train_set, data.limit);
    truncate(val_set, data.limit);
  }

  TrainConfig tc;
  tc.epochs = flags.epochs;
  tc.seed = config.seed;
  tc.lr0 = flags.lr0.value_or(default_lr0(config));
  tc.batch_size = flags.batch_size;
  tc.augmentation_policy = flags.augment;
  validate(tc);
  augment_policy(tc.augmentation_policy);

  Model model = build_model(config);
  err << "training " << train_set.size() << " images, " << tc.epochs << " epochs, lr0 " << tc.lr0 << '\n';
  const std::vector<MetricsRecord> records = train(model, train_set, val_set, tc);

  fs::create_directories(flags.out_dir);
  const fs::path dir(flags.out_dir);
  write_metrics_csv(records, (dir / "metrics.csv").string());
  save_checkpoint(model, (dir / "checkpoint.avck").string());
  save_config(config, (dir / "config.json").string());

  if (records.empty()) {
    out << "no epochs run; checkpoint holds the initialization\n";
  } else {
    const MetricsRecord& r = records.back();
    out << "epoch " << r.epoch << " train_loss " << fmt(r.train_loss) << " train_acc " << fmt(r.train_acc)
        << " val_acc " << fmt(r.val_acc) << " macro_f1 " << fmt(r.macro_f1) << '\n';
  }
  return kOk;
}

int cmd_eval(const ModelSource& src, const std::string& checkpoint, const DataOptions& data, std::ostream& out) {
  ModelConfig config;
  if (!src.config_path.empty() || !src.preset_name.empty()) {
    config = resolve_config(src, "");
  } else {
    const fs::path beside = fs::path(checkpoint).parent_path() / "config.json";
    if (!fs::exists(beside)) {
      throw ConfigError("no config.json next to " + checkpoint + "; pass --config or --preset");
    }
    config = load_config(beside.string());
  }
  Model model = build_model(config);
  load_checkpoint(model, checkpoint);

  Dataset test_set;
  if (data.source == "synthetic") {
    test_set = synthetic_for(config, data.test_size, data.data_seed + 2);
  } else {
    require_cifar_shape(config);
    test_set = load_cifar_split(data.source, false);
    truncate(test_set, data.limit);
  }
  const EvalResult r = evaluate(model, test_set);
  out << "images " << test_set.size() << '\n';
  out << "accuracy " << fmt(r.accuracy) << '\n';
  out << "macro_f1 " << fmt(r.macro_f1) << '\n';
  out << "class precision recall f1\n";
  for (std::size_t k = 0; k < r.f1.size(); ++k) {
    out << k << ' ' << fmt(r.precision[k]) << ' ' << fmt(r.recall[k]) << ' ' << fmt(r.f1[k]) << '\n';
  }
  return kOk;
}

// export-config / tile -----------------------------------------------------

int cmd_export(const std::string& name, const std::string& path, std::ostream& out) {
  const ModelConfig config = preset(name);
  if (path.empty()) {
    out << to_json(config);
  } else {
    save_config(config, path);
  }
  return kOk;
}

struct TileFlags {
  std::size_t height = 0, width = 0, tile_h = 0, tile_w = 0, step = 4;
  std::string cifar;
  std::size_t index = 0;
};

int cmd_tile(const TileFlags& t, std::ostream& out) {
  if (!t.cifar.empty()) {
    const Dataset images = load_cifar10_binary(t.cifar);
    if (t.index >= images.size()) {
      throw DataError("--index " + std::to_string(t.index) + " out of range (" + std::to_string(images.size()) +
                      " images)");
    }
    const Tensor& px = images[t.index].pixels;
    const auto tiles = tile_image(px, t.tile_h, t.tile_w, t.step);
    const auto rows = tile_offsets(px.shape().h, t.tile_h, t.step);
    const auto cols = tile_offsets(px.shape().w, t.tile_w, t.step);
    out << "tiles " << tiles.size() << '\n';
    for (std::size_t i = 0; i < tiles.size(); ++i) {
      double mean = 0.0;
      for (double v : tiles[i].data()) mean += v;
      mean /= static_cast<double>(tiles[i].numel());
      out << rows[i / cols.size()] << ' ' << cols[i % cols.size()] << ' ' << fmt(mean) << '\n';
    }
    return kOk;
  }
  if (t.height == 0 || t.width == 0) throw ArgumentError("tile: give --height and --width, or --cifar");
  const auto rows = tile_offsets(t.height, t.tile_h, t.step);
  const auto cols = tile_offsets(t.width, t.tile_w, t.step);
  out << "tiles " << rows.size() * cols.size() << '\n';
  for (auto r : rows) {
    for (auto c : cols) out << r << ' ' << c << '\n';
  }
  return kOk;
}

}  // namespace

ModelConfig miniature(const ModelConfig& config) {
  if (config == preset("mini")) return config;
  ModelConfig m = config;
  std::vector<Phase> phases;
  for (const auto& s : config.stages) phases.push_back(s.phase);
  for (std::size_t f0 = 1;; f0 *= 2) {
    try {
      width_schedule(f0, phases, config.gamma, config.delta);
      m.stem_width = f0 < 2 ? 2 : f0;
      break;
    } catch (const ConfigError&) {
      if (f0 > (std::size_t{1} << 20)) throw;
    }
  }
  std::size_t extent = 4;
  for (auto& s : m.stages) {
    s.num_units = std::min<std::size_t>(s.num_units, 2);
    if (s.downsample) extent *= 2;
  }
  m.input_shape = {config.input_shape.c, extent, extent};
  m.num_classes = std::min<std::size_t>(config.num_classes, 3);
  m.c_max = m.k_max = 0;
  validate(m);
  return m;
}

double default_lr0(const ModelConfig& config) {
  const double scale = std::min(1.0, static_cast<double>(config.stem_width) / 80.0);
  return 0.175 * scale;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"AdaptoVision: train, analyse and verify the model", "adaptovision"};
  app.require_subcommand(1);

  ModelSource describe_src;
  std::string csv_path;
  auto* describe = app.add_subcommand("describe", "Print the cost report");
  add_model_source(describe, describe_src);
  describe->add_option("--csv", csv_path, "Also write the per-layer table as CSV");

  std::string gc_preset = "mini";
  double gc_eps = 1e-5, gc_threshold = 1e-4;
  std::size_t gc_coords = 128;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of a miniature model");
  gradcheck->add_option("--preset", gc_preset, "Preset to miniaturise");
  gradcheck->add_option("--eps", gc_eps, "Central-difference step");
  gradcheck->add_option("--threshold", gc_threshold, "Pass if max relative error is below this");
  gradcheck->add_option("--max-coords", gc_coords, "Coordinates checked per tensor (0 = all)");

  ModelSource train_src;
  DataOptions train_data;
  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train and write metrics.csv, checkpoint.avck, config.json");
  add_model_source(train_cmd, train_src);
  add_data_options(train_cmd, train_data, true);
  train_cmd->add_option("--epochs", train_flags.epochs, "Epochs");
  train_cmd->add_option("--seed", train_flags.seed, "Seed for initialization, shuffling and dropout");
  train_cmd->add_option("--out", train_flags.out_dir, "Output directory");
  train_cmd->add_option("--lr0", train_flags.lr0, "Initial learning rate");
  train_cmd->add_option("--batch-size", train_flags.batch_size, "Mini-batch size");
  train_cmd->add_option("--augment", train_flags.augment, "Augmentation policy (none, cifar)");

  ModelSource eval_src;
  DataOptions eval_data;
  std::string checkpoint;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_model_source(eval_cmd, eval_src);
  add_data_options(eval_cmd, eval_data, false);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  std::string export_preset, export_path;
  auto* export_cmd = app.add_subcommand("export-config", "Write a preset as JSON");
  export_cmd->add_option("--preset", export_preset, "Preset name")->required();
  export_cmd->add_option("--out", export_path, "Output path (stdout if omitted)");

  TileFlags tile_flags;
  auto* tile = app.add_subcommand("tile", "Enumerate sliding-window tiles");
  tile->add_option("--height", tile_flags.height, "Image height");
  tile->add_option("--width", tile_flags.width, "Image width");
  tile->add_option("--tile-h", tile_flags.tile_h, "Tile height")->required();
  tile->add_option("--tile-w", tile_flags.tile_w, "Tile width")->required();
  tile->add_option("--step", tile_flags.step, "Window step");
  tile->add_option("--cifar", tile_flags.cifar, "Tile an image from a CIFAR-10 binary file");
  tile->add_option("--index", tile_flags.index, "Image index within --cifar");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*describe) return cmd_describe(describe_src, csv_path, out, err);
    if (*gradcheck) return cmd_gradcheck(gc_preset, gc_eps, gc_threshold, gc_coords, out, err);
    if (*train_cmd) return cmd_train(train_src, train_data, train_flags, out, err);
    if (*eval_cmd) return cmd_eval(eval_src, checkpoint, eval_data, out);
    if (*export_cmd) return cmd_export(export_preset, export_path, out);
    if (*tile) return cmd_tile(tile_flags, out);
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const ContractError& e) {
    err << "check failed: " << e.what() << '\n';
    return kCheckFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace adapto::cli
