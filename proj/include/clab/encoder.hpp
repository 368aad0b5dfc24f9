#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clab/rng.hpp"
#include "clab/tensor.hpp"

namespace clab {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

// MLP with ReLU on every hidden layer, a linear output layer, and an
// l2-normalizing head. Layer i maps sizes[i] -> sizes[i + 1].
struct EncoderParams {
  std::vector<DenseLayer> layers;

  static EncoderParams zeros(std::span<const std::size_t> sizes);
  // He-uniform weights, zero biases.
  static EncoderParams init(std::span<const std::size_t> sizes, RngStream rng);

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
  std::size_t parameter_count() const;
  std::vector<std::size_t> sizes() const;

  // Throws if shapes do not chain or any value is non-finite.
  void validate() const;
  bool same_shape(const EncoderParams& other) const;
  // Order-sensitive hash of every weight and bias.
  std::uint64_t digest() const;

  bool operator==(const EncoderParams& other) const;
};

// Accumulated dL/dtheta, shape-congruent with an EncoderParams.
struct GradBuffer {
  std::vector<DenseLayer> layers;

  static GradBuffer zeros_like(const EncoderParams& params);
  bool congruent_with(const EncoderParams& params) const;
  double max_abs() const;
};

struct ActivationRecord {
  std::uint64_t params_digest = 0;
  Eigen::MatrixXd input;                     // in_dim x N
  std::vector<Eigen::MatrixXd> pre;          // per layer, before activation
  std::vector<Eigen::MatrixXd> post;         // per hidden layer, after ReLU
  Eigen::VectorXd head_norms;                // ||z|| per column
  Eigen::MatrixXd output;                    // normalized embeddings, out_dim x N
  const Eigen::MatrixXd& head_input() const { return pre.back(); }
};

struct ForwardResult {
  EmbeddingBatch embeddings;
  ActivationRecord record;
};

// Column-per-sample matrix of flattened images.
Eigen::MatrixXd images_to_matrix(std::span<const ImageTensor> images);

ForwardResult forward(const EncoderParams& params, const Eigen::MatrixXd& inputs);
ForwardResult forward(const EncoderParams& params, std::span<const ImageTensor> images);
// Matrix-only forward used by the training loop; skips building EmbeddingBatch.
ActivationRecord forward_record(const EncoderParams& params, const Eigen::MatrixXd& inputs);

// Gradients summed over the batch columns. `upstream` is dL/d(normalized
// embedding), out_dim x N.
GradBuffer backward(const EncoderParams& params, const ActivationRecord& record,
                    const Eigen::MatrixXd& upstream);
GradBuffer backward(const EncoderParams& params, const ActivationRecord& record,
                    std::span<const EmbeddingVector> upstream);

EncoderParams momentum_update(const EncoderParams& key, const EncoderParams& query, double m);

struct TrainConfig {
  double lr = 0.03;
  double weight_decay = 1e-4;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  double key_momentum = 0.999;
  double temperature = 0.2;
  std::size_t queue_size = 1024;
  std::size_t views = 2;

  void validate() const;
};

// Learning rate for `epoch` with x0.1 decays at 60% and 80% of training.
double scheduled_lr(const TrainConfig& cfg, std::size_t epoch);

struct SgdResult {
  EncoderParams params;
  GradBuffer velocity;
};

// v' = momentum * v + (g + wd * theta); theta' = theta - lr * v'.
SgdResult sgd_step(const EncoderParams& params, const GradBuffer& grads, const GradBuffer& velocity,
                   const TrainConfig& cfg);

}  // namespace clab
