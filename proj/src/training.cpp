#include "vpt/training.hpp"

#include <chrono>
#include <cstdio>
#include <random>

#include "vpt/errors.hpp"
#include "vpt/ops.hpp"
#include "vpt/optim.hpp"
#include "vpt/seeding.hpp"

namespace vpt {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void check_dataset(const LabeledDataset& data, std::size_t classes, const char* what) {
  data.validate();
  if (data.size() == 0) throw DataError(std::string(what) + " set is empty");
  for (auto y : data.labels) {
    if (y >= classes) {
      throw DataError(std::string(what) + " label " + std::to_string(y) + " is outside the " +
                      std::to_string(classes) + " output classes");
    }
  }
}

std::size_t steps_for(std::size_t n, const TrainOptions& o) {
  if (o.batch_size == 0) throw ConfigError("batch size must be positive");
  return o.epochs * ((n + o.batch_size - 1) / o.batch_size);
}

}  // namespace

std::string csv_header() { return "method,dataset,template,p,seed,epochs,train_acc,test_acc,wall_ms,config_hash"; }

std::string csv_row(const RunResult& r) {
  return r.method + "," + r.dataset + "," + r.templ + "," + std::to_string(r.p) + "," + std::to_string(r.seed) + "," +
         std::to_string(r.epochs) + "," + fixed(r.train_acc, 6) + "," + fixed(r.test_acc, 6) + "," +
         fixed(r.wall_ms, 1) + "," + r.config_hash;
}

double evaluate(const Backbone& backbone, const OutputTransform& transform, const PromptParams* prompt,
                const LabeledDataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw DataError("cannot evaluate on an empty set");
  check_dataset(data, transform.classes(), "evaluation");
  std::mt19937_64 placement = prompt ? prompt->eval_stream() : std::mt19937_64{};
  std::size_t correct = 0;
  for (const auto& rows : sequential_batches(data.size(), batch_size)) {
    Tensor x = data.batch(rows);
    if (prompt) x = apply_prompt(*prompt, x, placement);
    const auto pred = ops::argmax_rows(transform_logits(backbone, transform, x));
    for (std::size_t i = 0; i < rows.size(); ++i) correct += pred[i] == data.labels[rows[i]];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

PromptTuneResult prompt_tune(const Backbone& backbone, const OutputTransform& transform, const LabeledDataset& train,
                             const LabeledDataset* test, const PromptTemplate& templ, const PromptInit& init,
                             PromptSpace space, const TrainOptions& options) {
  if (!backbone.frozen()) throw Error("prompt tuning requires a frozen backbone");
  check_dataset(train, transform.classes(), "training");
  if (test) check_dataset(*test, transform.classes(), "test");
  const auto start = Clock::now();

  PromptParams prompt = init_prompt(templ, train.channels(), train.height(), train.width(), init, options.seed);
  prompt.space = space;
  prompt.channel_std = train.stats.std;

  std::vector<Tensor> params{prompt.values};
  CosineSgd opt(options.lr, steps_for(train.size(), options), options.momentum);
  std::mt19937_64 order(mix_seed(options.seed, 0xba7c));
  RunResult r;
  r.method = transform.is_mapping() ? "VP" : "VP+TP";
  r.templ = to_string(templ.kind);
  r.p = templ.size;
  r.seed = options.seed;
  r.epochs = options.epochs;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& rows : shuffled_batches(train.size(), options.batch_size, order)) {
      const Tensor x = apply_prompt(prompt, train.batch(rows), ApplyMode::train);
      const Tensor loss = transform_loss(backbone, transform, x, train.batch_labels(rows));
      require_finite(loss, "prompt tuning loss");
      backward(loss);
      opt.step(params);
      total += static_cast<double>(loss.item()) * static_cast<double>(rows.size());
    }
    r.epoch_loss.push_back(total / static_cast<double>(train.size()));
  }
  require_finite(prompt.values, "prompt values");
  r.train_acc = evaluate(backbone, transform, &prompt, train);
  if (test) r.test_acc = evaluate(backbone, transform, &prompt, *test);
  r.wall_ms = elapsed_ms(start);
  return {std::move(prompt), std::move(r)};
}

Tensor extract_features(const Backbone& backbone, const LabeledDataset& data, std::size_t batch_size) {
  std::vector<float> out;
  std::size_t d = 0;
  for (const auto& rows : sequential_batches(data.size(), batch_size)) {
    const Tensor f = backbone.features(data.batch(rows));
    d = f.dim(1);
    out.insert(out.end(), f.data().begin(), f.data().end());
  }
  return Tensor({data.size(), d}, std::move(out));
}

namespace {

Tensor rows_of(const Tensor& m, const std::vector<std::size_t>& rows) {
  const std::size_t d = m.dim(1);
  std::vector<float> out;
  out.reserve(rows.size() * d);
  for (auto r : rows) {
    const auto src = m.data().subspan(r * d, d);
    out.insert(out.end(), src.begin(), src.end());
  }
  return Tensor({rows.size(), d}, std::move(out));
}

}  // namespace

double probe_accuracy(const LinearProbe& probe, const Tensor& features, const std::vector<std::size_t>& labels) {
  if (labels.empty()) throw DataError("cannot evaluate on an empty set");
  const auto pred = ops::argmax_rows(ops::linear(features, probe.weight, probe.bias));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += pred[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

ProbeResult linear_probe(const Backbone& backbone, const LabeledDataset& train, const LabeledDataset* test,
                         const TrainOptions& options) {
  if (!backbone.frozen()) throw Error("linear probe requires a frozen backbone");
  const std::size_t k = train.class_names.size();
  check_dataset(train, k, "training");
  if (test) check_dataset(*test, k, "test");
  const auto start = Clock::now();

  const Tensor feats = extract_features(backbone, train);
  const std::size_t d = feats.dim(1);
  std::mt19937_64 init_rng(mix_seed(options.seed, 0x9b0b));
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<float> u(static_cast<float>(-bound), static_cast<float>(bound));
  LinearProbe probe{Tensor({k, d}), Tensor({k}, 0.0f)};
  for (auto& v : probe.weight.mutable_data()) v = u(init_rng);
  probe.weight.set_requires_grad(true);
  probe.bias.set_requires_grad(true);

  std::vector<Tensor> params{probe.weight, probe.bias};
  CosineSgd opt(options.lr, steps_for(train.size(), options), options.momentum);
  std::mt19937_64 order(mix_seed(options.seed, 0xba7c));
  RunResult r;
  r.method = "LP";
  r.templ = "-";
  r.seed = options.seed;
  r.epochs = options.epochs;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& rows : shuffled_batches(train.size(), options.batch_size, order)) {
      const Tensor logits = ops::linear(rows_of(feats, rows), probe.weight, probe.bias);
      const Tensor loss = ops::softmax_cross_entropy(logits, train.batch_labels(rows));
      require_finite(loss, "linear probe loss");
      backward(loss);
      opt.step(params);
      total += static_cast<double>(loss.item()) * static_cast<double>(rows.size());
    }
    r.epoch_loss.push_back(total / static_cast<double>(train.size()));
  }
  r.train_acc = probe_accuracy(probe, feats, train.labels);
  if (test) r.test_acc = probe_accuracy(probe, extract_features(backbone, *test), test->labels);
  r.wall_ms = elapsed_ms(start);
  return {std::move(probe), std::move(r)};
}

FineTuneResult fine_tune(const Backbone& backbone, const OutputTransform& transform, const LabeledDataset& train,
                         const LabeledDataset* test, const TrainOptions& options) {
  check_dataset(train, transform.classes(), "training");
  if (test) check_dataset(*test, transform.classes(), "test");
  const auto start = Clock::now();
  Backbone model = backbone.trainable_copy();
  auto params = model.trainable_params();
  CosineSgd opt(options.lr, steps_for(train.size(), options), options.momentum);
  std::mt19937_64 order(mix_seed(options.seed, 0xba7c));
  RunResult r;
  r.method = "FT";
  r.templ = "-";
  r.seed = options.seed;
  r.epochs = options.epochs;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& rows : shuffled_batches(train.size(), options.batch_size, order)) {
      const Tensor loss = transform_loss(model, transform, train.batch(rows), train.batch_labels(rows));
      require_finite(loss, "fine-tuning loss");
      backward(loss);
      opt.step(params);
      total += static_cast<double>(loss.item()) * static_cast<double>(rows.size());
    }
    r.epoch_loss.push_back(total / static_cast<double>(train.size()));
  }
  model.freeze();
  r.train_acc = evaluate(model, transform, nullptr, train);
  if (test) r.test_acc = evaluate(model, transform, nullptr, *test);
  r.wall_ms = elapsed_ms(start);
  return {std::move(model), std::move(r)};
}

}  // namespace vpt
