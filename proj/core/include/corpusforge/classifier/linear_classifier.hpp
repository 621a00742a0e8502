#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/classifier/featurizer.hpp"
#include "corpusforge/io/document.hpp"

namespace corpusforge::classifier {

inline constexpr std::size_t kNegativeClass = 0;
inline constexpr std::size_t kPositiveClass = 1;

/// Mean of hashed n-gram embeddings followed by a bias-free linear layer and
/// softmax. Weights are stored as float; the forward pass accumulates in
/// double.
class LinearClassifier {
 public:
  LinearClassifier(FeaturizerConfig featurizer, std::size_t dim,
                   std::vector<std::string> labels = {"negative", "positive"});

  const NgramFeaturizer& featurizer() const { return featurizer_; }
  std::size_t dim() const { return dim_; }
  std::size_t num_classes() const { return labels_.size(); }
  std::size_t buckets() const { return featurizer_.config().buckets; }
  const std::vector<std::string>& labels() const { return labels_; }

  std::span<float> input_row(std::uint32_t bucket) {
    return {input_.data() + static_cast<std::size_t>(bucket) * dim_, dim_};
  }
  std::span<const float> input_row(std::uint32_t bucket) const {
    return {input_.data() + static_cast<std::size_t>(bucket) * dim_, dim_};
  }
  std::span<float> output_row(std::size_t cls) { return {output_.data() + cls * dim_, dim_}; }
  std::span<const float> output_row(std::size_t cls) const {
    return {output_.data() + cls * dim_, dim_};
  }
  std::span<float> input_table() { return input_; }
  std::span<const float> input_table() const { return input_; }
  std::span<float> output_weights() { return output_; }
  std::span<const float> output_weights() const { return output_; }

  /// Mean of input rows for the features; zero vector for no features.
  std::vector<double> hidden(std::span<const std::uint32_t> features) const;

  /// Softmax class probabilities. No features gives the uniform 1/C.
  std::vector<double> probabilities(std::span<const std::uint32_t> features) const;
  std::vector<double> probabilities(std::string_view text) const;

  /// Probability of the positive class.
  double predict(std::string_view text) const;

  void save(const std::filesystem::path& file) const;
  static LinearClassifier load(const std::filesystem::path& file);

  friend bool operator==(const LinearClassifier&, const LinearClassifier&) = default;

 private:
  NgramFeaturizer featurizer_;
  std::size_t dim_;
  std::vector<std::string> labels_;
  std::vector<float> input_;   // buckets x dim
  std::vector<float> output_;  // classes x dim
};

struct LabeledExample {
  io::Document doc;
  bool positive = false;
};

/// Cross-entropy loss of one example and its gradient. Input-row gradients
/// are expressed through hidden_grad: every occurrence of a feature receives
/// hidden_grad / feature_count.
struct ExampleGradient {
  double loss = 0.0;
  std::vector<double> output;       // classes x dim, dL/dW_out
  std::vector<double> hidden_grad;  // dim, dL/dhidden
  std::size_t feature_count = 0;
};

double example_loss(const LinearClassifier& model, std::span<const std::uint32_t> features,
                    std::size_t label);
ExampleGradient example_gradient(const LinearClassifier& model,
                                 std::span<const std::uint32_t> features, std::size_t label);

struct TrainOptions {
  FeaturizerConfig featurizer;
  std::size_t dim = 16;
  int epochs = 5;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  LinearClassifier model;
  double train_accuracy = 0.0;
  std::uint64_t skipped_empty = 0;
};

/// Sequential SGD, learning rate decayed linearly to zero over all updates,
/// examples reshuffled every epoch. Deterministic given (examples, options).
TrainResult train(std::span<const LabeledExample> examples, const TrainOptions& options);

/// Fraction of non-empty examples whose argmax class matches the label.
double accuracy(const LinearClassifier& model, std::span<const LabeledExample> examples);

}  // namespace corpusforge::classifier
