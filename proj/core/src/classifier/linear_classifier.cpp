#include "corpusforge/classifier/linear_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "corpusforge/util/binary.hpp"
#include "corpusforge/util/error.hpp"
#include "corpusforge/util/rng.hpp"

namespace corpusforge::classifier {

namespace {

constexpr binary::Magic kModelMagic = binary::make_magic("CFLINCLS");
constexpr std::uint32_t kModelVersion = 1;

void softmax_inplace(std::vector<double>& logits) {
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - max);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

std::vector<double> logits_of(const LinearClassifier& model, const std::vector<double>& hidden) {
  std::vector<double> logits(model.num_classes(), 0.0);
  for (std::size_t c = 0; c < logits.size(); ++c) {
    const auto row = model.output_row(c);
    double acc = 0.0;
    for (std::size_t j = 0; j < hidden.size(); ++j) acc += static_cast<double>(row[j]) * hidden[j];
    logits[c] = acc;
  }
  return logits;
}

}  // namespace

LinearClassifier::LinearClassifier(FeaturizerConfig featurizer, std::size_t dim,
                                   std::vector<std::string> labels)
    : featurizer_(std::move(featurizer)), dim_(dim), labels_(std::move(labels)) {
  if (dim_ < 1) throw ConfigError("classifier dimension must be >= 1");
  if (labels_.size() < 2) throw ConfigError("classifier needs at least two labels");
  input_.assign(static_cast<std::size_t>(buckets()) * dim_, 0.0f);
  output_.assign(labels_.size() * dim_, 0.0f);
}

std::vector<double> LinearClassifier::hidden(std::span<const std::uint32_t> features) const {
  std::vector<double> h(dim_, 0.0);
  if (features.empty()) return h;
  for (std::uint32_t f : features) {
    const auto row = input_row(f);
    for (std::size_t j = 0; j < dim_; ++j) h[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(features.size());
  for (double& v : h) v *= inv;
  return h;
}

std::vector<double> LinearClassifier::probabilities(std::span<const std::uint32_t> features) const {
  if (features.empty()) {
    return std::vector<double>(num_classes(), 1.0 / static_cast<double>(num_classes()));
  }
  auto p = logits_of(*this, hidden(features));
  softmax_inplace(p);
  return p;
}

std::vector<double> LinearClassifier::probabilities(std::string_view text) const {
  const auto features = featurizer_.featurize(text);
  return probabilities(features);
}

double LinearClassifier::predict(std::string_view text) const {
  return probabilities(text)[kPositiveClass];
}

void LinearClassifier::save(const std::filesystem::path& file) const {
  std::filesystem::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    binary::write_header(out, kModelMagic, kModelVersion);
    const auto& cfg = featurizer_.config();
    binary::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.ngram_orders.size()));
    for (int n : cfg.ngram_orders) binary::write_pod<std::int32_t>(out, n);
    binary::write_pod<std::uint64_t>(out, cfg.buckets);
    binary::write_pod<std::uint64_t>(out, cfg.hash_seed);
    binary::write_pod<std::uint64_t>(out, dim_);
    binary::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(labels_.size()));
    for (const auto& l : labels_) binary::write_string(out, l);
    binary::write_array<float>(out, input_);
    binary::write_array<float>(out, output_);
    out.flush();
    if (!out) throw IoError("failed writing model " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

LinearClassifier LinearClassifier::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open model " + file.string());
  const auto version = binary::read_header(in, kModelMagic, "classifier model");
  if (version != kModelVersion) throw IoError("unsupported model version");
  FeaturizerConfig cfg;
  cfg.ngram_orders.resize(binary::read_pod<std::uint32_t>(in));
  for (int& n : cfg.ngram_orders) n = binary::read_pod<std::int32_t>(in);
  cfg.buckets = binary::read_pod<std::uint64_t>(in);
  cfg.hash_seed = binary::read_pod<std::uint64_t>(in);
  const auto dim = binary::read_pod<std::uint64_t>(in);
  std::vector<std::string> labels(binary::read_pod<std::uint32_t>(in));
  for (auto& l : labels) l = binary::read_string(in);
  LinearClassifier model(cfg, dim, std::move(labels));
  binary::read_array<float>(in, model.input_);
  binary::read_array<float>(in, model.output_);
  return model;
}

double example_loss(const LinearClassifier& model, std::span<const std::uint32_t> features,
                    std::size_t label) {
  const auto p = model.probabilities(features);
  return -std::log(p[label]);
}

ExampleGradient example_gradient(const LinearClassifier& model,
                                 std::span<const std::uint32_t> features, std::size_t label) {
  const std::size_t d = model.dim();
  const std::size_t classes = model.num_classes();
  ExampleGradient g;
  g.feature_count = features.size();
  g.output.assign(classes * d, 0.0);
  g.hidden_grad.assign(d, 0.0);

  const auto hidden = model.hidden(features);
  const auto p = model.probabilities(features);
  g.loss = -std::log(p[label]);
  if (features.empty()) return g;

  for (std::size_t c = 0; c < classes; ++c) {
    const double delta = p[c] - (c == label ? 1.0 : 0.0);
    const auto row = model.output_row(c);
    for (std::size_t j = 0; j < d; ++j) {
      g.output[c * d + j] = delta * hidden[j];
      g.hidden_grad[j] += delta * static_cast<double>(row[j]);
    }
  }
  return g;
}

void TrainOptions::validate() const {
  featurizer.validate();
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
}

TrainResult train(std::span<const LabeledExample> examples, const TrainOptions& options) {
  options.validate();

  LinearClassifier model(options.featurizer, options.dim);
  const std::size_t d = model.dim();

  // Featurize once; empty documents are skipped.
  std::vector<std::vector<std::uint32_t>> features;
  std::vector<std::size_t> labels;
  std::uint64_t skipped = 0;
  bool seen[2] = {false, false};
  for (const auto& ex : examples) {
    if (ex.doc.text.empty()) {
      ++skipped;
      continue;
    }
    auto f = model.featurizer().featurize(ex.doc.text);
    if (f.empty()) {
      ++skipped;
      continue;
    }
    features.push_back(std::move(f));
    const std::size_t label = ex.positive ? kPositiveClass : kNegativeClass;
    labels.push_back(label);
    seen[label] = true;
  }
  if (!seen[0] || !seen[1]) {
    throw ConfigError("training data must contain both positive and negative examples");
  }

  Rng rng(options.seed);
  const float bound = 1.0f / static_cast<float>(d);
  for (float& w : model.input_table()) {
    w = static_cast<float>((2.0 * rng.uniform01() - 1.0) * bound);
  }

  const std::size_t n = features.size();
  const double total_updates = static_cast<double>(n) * options.epochs;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t idx : order) {
      const double lr = options.learning_rate * (1.0 - static_cast<double>(step) / total_updates);
      ++step;
      const auto& f = features[idx];
      const ExampleGradient g = example_gradient(model, f, labels[idx]);
      auto out = model.output_weights();
      for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = static_cast<float>(out[k] - lr * g.output[k]);
      }
      const double scale = lr / static_cast<double>(f.size());
      for (std::uint32_t bucket : f) {
        auto row = model.input_row(bucket);
        for (std::size_t j = 0; j < d; ++j) {
          row[j] = static_cast<float>(row[j] - scale * g.hidden_grad[j]);
        }
      }
    }
  }

  TrainResult result{std::move(model), 0.0, skipped};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = result.model.probabilities(features[i]);
    const auto arg = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    if (arg == labels[i]) ++correct;
  }
  result.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return result;
}

double accuracy(const LinearClassifier& model, std::span<const LabeledExample> examples) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    if (ex.doc.text.empty()) continue;
    const auto p = model.probabilities(ex.doc.text);
    const auto arg = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    ++total;
    if (arg == (ex.positive ? kPositiveClass : kNegativeClass)) ++correct;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace corpusforge::classifier
