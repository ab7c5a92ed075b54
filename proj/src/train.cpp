#include "adapto/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "adapto/errors.hpp"
#include "adapto/layers.hpp"
#include "adapto/schedule.hpp"

namespace adapto {

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * (a + 1)) ^ (0xC2B2AE3D27D4EB4FULL * (b + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const Shape& s = logits.shape();
  std::vector<int> out(s.n);
  for (std::size_t n = 0; n < s.n; ++n) {
    const auto row = logits.data().subspan(n * s.c, s.c);
    out[n] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string largest_parameter(const Model& model) {
  std::string name = "<none>";
  double best = -1.0;
  for (const auto& e : model.registry) {
    for (double v : e.tensor.data()) {
      const double mag = std::isfinite(v) ? std::abs(v) : INFINITY;
      if (mag > best) {
        best = mag;
        name = e.name;
      }
    }
  }
  return name + " (|value| " + fmt(best) + ")";
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(cfg.decay_factor > 0.0 && cfg.decay_factor <= 1.0)) throw ConfigError("decay_factor must lie in (0, 1]");
  if (!(cfg.decay_period_epochs > 0.0)) throw ConfigError("decay_period_epochs must be positive");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(cfg.weight_decay >= 0.0) || !(cfg.clip_norm >= 0.0)) {
    throw ConfigError("weight_decay and clip_norm must be non-negative");
  }
  augment_policy(cfg.augmentation_policy);
}

EvalResult classification_metrics(std::span<const int> predicted, std::span<const int> labels,
                                  std::size_t num_classes) {
  if (predicted.size() != labels.size()) throw ShapeError("metrics: prediction and label counts differ");
  EvalResult r;
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto t = static_cast<std::size_t>(labels[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (t >= num_classes || p >= num_classes) throw DataError("metrics: class index out of range");
    ++r.confusion[t][p];
    if (t == p) ++correct;
  }
  const double total = static_cast<double>(labels.size());
  r.accuracy = labels.empty() ? 0.0 : static_cast<double>(correct) / total;

  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  double tp_sum = 0.0, fp_sum = 0.0, fn_sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    double tp = static_cast<double>(r.confusion[c][c]), fp = 0.0, fn = 0.0;
    for (std::size_t o = 0; o < num_classes; ++o) {
      if (o == c) continue;
      fp += static_cast<double>(r.confusion[o][c]);
      fn += static_cast<double>(r.confusion[c][o]);
    }
    const double p = ratio(tp, tp + fp);
    const double rc = ratio(tp, tp + fn);
    r.precision.push_back(p);
    r.recall.push_back(rc);
    r.f1.push_back(p + rc > 0.0 ? 2.0 * p * rc / (p + rc) : 0.0);
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;
  }
  r.macro_f1 = num_classes == 0 ? 0.0 : std::accumulate(r.f1.begin(), r.f1.end(), 0.0) / num_classes;
  r.micro_precision = ratio(tp_sum, tp_sum + fp_sum);
  r.micro_recall = ratio(tp_sum, tp_sum + fn_sum);
  return r;
}

EvalResult evaluate(Model& model, const Dataset& dataset, std::size_t batch_size) {
  if (dataset.empty()) throw ArgumentError("evaluate: empty dataset");
  std::vector<int> predicted, labels;
  predicted.reserve(dataset.size());
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(dataset.size(), start + batch_size); ++i) {
      idx.push_back(i);
      labels.push_back(dataset[i].label);
    }
    const auto preds = argmax_rows(forward(model, stack(dataset, idx), Mode::eval));
    predicted.insert(predicted.end(), preds.begin(), preds.end());
  }
  return classification_metrics(predicted, labels, model.config.num_classes);
}

void sgd_step(std::span<Tensor> params, const GradientMap& grads, double lr, double momentum, SgdState& state,
              double weight_decay, double clip_norm) {
  for (const Tensor& p : params) {
    if (!grads.contains(p)) {
      throw ContractError("sgd_step: no gradient for parameter of shape " + to_string(p.shape()));
    }
  }
  double clip = 1.0;
  if (clip_norm > 0.0) {
    double sq = 0.0;
    for (const Tensor& p : params) {
      for (double g : grads.at(p).data()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) clip = clip_norm / norm;
  }
  for (Tensor& p : params) {
    const auto g = grads.at(p).data();
    auto& v = state.velocity[p.id()];
    if (v.empty()) v.assign(p.numel(), 0.0);
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double grad = clip * g[i] + weight_decay * w[i];
      v[i] = momentum * v[i] + grad;
      w[i] -= lr * v[i];
    }
  }
}

std::vector<MetricsRecord> train(Model& model, const Dataset& train_set, const Dataset& val_set,
                                 const TrainConfig& cfg) {
  validate(cfg);
  std::vector<MetricsRecord> records;
  if (cfg.epochs == 0) return records;
  if (train_set.empty() || val_set.empty()) throw ArgumentError("train: datasets must be non-empty");

  const AugmentPolicy policy = augment_policy(cfg.augmentation_policy);
  const bool augmenting = cfg.augmentation_policy != "none";
  std::vector<Tensor> params = model.trainable_parameters();
  SgdState state;
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t steps_per_epoch = (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(train_set.size(), begin + cfg.batch_size);
      Dataset batch_images;
      std::vector<int> labels;
      for (std::size_t i = begin; i < end; ++i) {
        const LabeledImage& img = train_set[order[i]];
        batch_images.push_back(augmenting ? augment(img, policy, stream_seed(cfg.seed, epoch, order[i])) : img);
        labels.push_back(img.label);
      }
      std::vector<std::size_t> idx(batch_images.size());
      std::iota(idx.begin(), idx.end(), 0);
      const Tensor batch = stack(batch_images, idx);

      const double lr = lr_at(static_cast<double>(step) / static_cast<double>(steps_per_epoch), cfg);
      Tape tape;
      Tensor loss;
      {
        RecordScope scope(tape);
        ForwardOptions options;
        options.mode = Mode::train;
        options.dropout_seed = stream_seed(cfg.seed, 0xD80, step);
        loss = softmax_cross_entropy(forward(model, batch, options), labels);
      }
      if (!std::isfinite(loss[0])) {
        throw NumericalError("non-finite loss at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) +
                             "); largest parameter: " + largest_parameter(model));
      }
      loss_sum += loss[0];
      const GradientMap grads = tape.backward(loss);
      sgd_step(params, grads, lr, cfg.momentum, state, cfg.weight_decay, cfg.clip_norm);
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
    rec.train_acc = evaluate(model, train_set).accuracy;
    const EvalResult val = evaluate(model, val_set);
    rec.val_acc = val.accuracy;
    rec.precision = val.precision;
    rec.recall = val.recall;
    rec.f1 = val.f1;
    rec.macro_f1 = val.macro_f1;
    rec.lr = lr_at(static_cast<double>(epoch), cfg);
    records.push_back(std::move(rec));
  }
  return records;
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
  std::ostringstream os;
  os << "epoch,train_loss,train_acc,val_acc,lr,macro_f1\n";
  for (const auto& r : records) {
    os << r.epoch << ',' << fmt(r.train_loss) << ',' << fmt(r.train_acc) << ',' << fmt(r.val_acc) << ','
       << fmt(r.lr) << ',' << fmt(r.macro_f1) << '\n';
  }
  return os.str();
}

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write metrics file " + path);
  out << metrics_csv(records);
}

}  // namespace adapto
