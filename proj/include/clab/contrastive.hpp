#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "clab/rng.hpp"
#include "clab/tensor.hpp"

namespace clab {

using Label = std::int64_t;
inline constexpr Label kUnlabeled = -1;

// FIFO ring of unit-norm keys with an aligned label ring. Slots
// [0, filled()) are valid.
class NegativeQueue {
 public:
  NegativeQueue(std::size_t capacity, std::size_t dim);

  // Full queue of seeded random unit vectors, all UNLABELED.
  static NegativeQueue random(std::size_t capacity, std::size_t dim, RngStream rng);

  std::size_t capacity() const { return labels_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(keys_.rows()); }
  std::size_t filled() const { return filled_; }
  std::size_t cursor() const { return cursor_; }
  bool empty() const { return filled_ == 0; }

  Label label(std::size_t slot) const { return labels_[slot]; }
  Eigen::Ref<const Eigen::VectorXd> key(std::size_t slot) const { return keys_.col(static_cast<Eigen::Index>(slot)); }
  EmbeddingVector key_vector(std::size_t slot) const;

  // Throws if any key is not unit-normalized or label count mismatches.
  void push(const EmbeddingBatch& keys, std::span<const Label> labels);
  // Column-per-key variant for the training loop.
  void push(const Eigen::MatrixXd& keys, std::span<const Label> labels);

 private:
  void push_one(const double* key, Label label);

  Eigen::MatrixXd keys_;  // dim x capacity
  std::vector<Label> labels_;
  std::size_t cursor_ = 0;
  std::size_t filled_ = 0;
};

NegativeQueue queue_push(NegativeQueue queue, const EmbeddingBatch& keys, std::span<const Label> labels);

// Filled slots whose label differs from `anchor_label`; UNLABELED slots are kept.
std::vector<std::size_t> filter_negatives(const NegativeQueue& queue, Label anchor_label);

struct LossBreakdown {
  double loss = 0.0;
  double kappa = 0.0;                   // exp(q . k_pos / tau)
  std::vector<double> negative_logits;  // q . k_m / tau over the active set
  std::size_t active_negatives = 0;
  EmbeddingVector grad_q;               // dL/dq with keys held constant
};

// InfoNCE against every filled slot. Throws on an empty queue.
LossBreakdown loss_self(const EmbeddingVector& q, const EmbeddingVector& k_pos,
                        const NegativeQueue& queue, double tau);

// InfoNCE against slots whose label differs from `anchor_label`. An empty
// filtered set gives loss 0 and a zero gradient.
LossBreakdown loss_full(const EmbeddingVector& q, const EmbeddingVector& k_pos,
                        const NegativeQueue& queue, Label anchor_label, double tau);

// InfoNCE over an explicit slot subset, in the order given.
LossBreakdown contrast(const EmbeddingVector& q, const EmbeddingVector& k_pos,
                       const NegativeQueue& queue, std::span<const std::size_t> slots, double tau);

struct LabelMask {
  std::optional<Label> label;  // present iff the sample is labeled
  bool labeled() const { return label.has_value(); }
};

struct SemiSample {
  EmbeddingVector q;
  EmbeddingVector k_pos;
  LabelMask mask;
};

struct SemiResult {
  double total = 0.0;
  std::vector<LossBreakdown> per_sample;
};

// Labeled samples use loss_full against queue_d, unlabeled ones loss_self
// against queue_u; total is the plain sum.
SemiResult loss_semi(std::span<const SemiSample> batch, const NegativeQueue& queue_d,
                     const NegativeQueue& queue_u, double tau);

enum class LossKind { Self, Full, Semi };

// One loss evaluation for gradient checking. For Semi the instance is a
// single sample routed by `label` (absent -> unlabeled branch).
struct LossInstance {
  LossKind kind = LossKind::Self;
  EmbeddingVector q;
  EmbeddingVector k_pos;
  const NegativeQueue* queue = nullptr;    // self / full / semi labeled
  const NegativeQueue* queue_u = nullptr;  // semi unlabeled
  std::optional<Label> label;
  double tau = 0.2;
};

LossBreakdown evaluate(const LossInstance& inst);

// Relative error used by every gradient check: |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-6);

// Max relative error between the analytic grad_q and central differences
// taken in ambient space (no re-projection onto the sphere).
double loss_grad_check(const LossInstance& inst, double h = 1e-5);

}  // namespace clab
