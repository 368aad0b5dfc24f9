#include "clab/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace clab {

namespace {

constexpr double kUnitTolerance = 1e-9;

void require_unit(const double* v, std::size_t dim, const char* what) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) s += v[i] * v[i];
  if (!(std::abs(std::sqrt(s) - 1.0) < kUnitTolerance))
    throw std::invalid_argument(std::string(what) + ": key is not unit-normalized (norm " +
                                std::to_string(std::sqrt(s)) + ")");
}

}  // namespace

NegativeQueue::NegativeQueue(std::size_t capacity, std::size_t dim)
    : keys_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(capacity))),
      labels_(capacity, kUnlabeled) {
  if (capacity == 0) throw std::invalid_argument("NegativeQueue: capacity must be >= 1");
  if (dim == 0) throw std::invalid_argument("NegativeQueue: dim must be >= 1");
}

NegativeQueue NegativeQueue::random(std::size_t capacity, std::size_t dim, RngStream rng) {
  NegativeQueue q(capacity, dim);
  std::vector<double> v(dim);
  for (std::size_t s = 0; s < capacity; ++s) {
    double n = 0.0;
    do {
      n = 0.0;
      for (auto& x : v) {
        x = rng.normal();
        n += x * x;
      }
      n = std::sqrt(n);
    } while (!(n > 1e-6));
    for (auto& x : v) x /= n;
    q.push_one(v.data(), kUnlabeled);
  }
  return q;
}

EmbeddingVector NegativeQueue::key_vector(std::size_t slot) const {
  const auto col = key(slot);
  return EmbeddingVector(std::vector<double>(col.data(), col.data() + col.size()), true);
}

void NegativeQueue::push_one(const double* key, Label label) {
  std::copy(key, key + dim(), keys_.col(static_cast<Eigen::Index>(cursor_)).data());
  labels_[cursor_] = label;
  cursor_ = (cursor_ + 1) % capacity();
  filled_ = std::min(filled_ + 1, capacity());
}

void NegativeQueue::push(const EmbeddingBatch& keys, std::span<const Label> labels) {
  if (keys.count() != labels.size())
    throw std::invalid_argument("queue_push: " + std::to_string(keys.count()) + " keys but " +
                                std::to_string(labels.size()) + " labels");
  for (const auto& k : keys) {
    if (k.dim() != dim())
      throw std::invalid_argument("queue_push: key dim " + std::to_string(k.dim()) +
                                  " does not match queue dim " + std::to_string(dim()));
    require_unit(k.values.data(), k.dim(), "queue_push");
  }
  for (std::size_t i = 0; i < keys.count(); ++i) push_one(keys[i].values.data(), labels[i]);
}

void NegativeQueue::push(const Eigen::MatrixXd& keys, std::span<const Label> labels) {
  if (static_cast<std::size_t>(keys.cols()) != labels.size())
    throw std::invalid_argument("queue_push: key/label count mismatch");
  if (static_cast<std::size_t>(keys.rows()) != dim())
    throw std::invalid_argument("queue_push: key dim " + std::to_string(keys.rows()) +
                                " does not match queue dim " + std::to_string(dim()));
  for (Eigen::Index j = 0; j < keys.cols(); ++j) require_unit(keys.col(j).data(), dim(), "queue_push");
  for (Eigen::Index j = 0; j < keys.cols(); ++j)
    push_one(keys.col(j).data(), labels[static_cast<std::size_t>(j)]);
}

NegativeQueue queue_push(NegativeQueue queue, const EmbeddingBatch& keys, std::span<const Label> labels) {
  queue.push(keys, labels);
  return queue;
}

std::vector<std::size_t> filter_negatives(const NegativeQueue& queue, Label anchor_label) {
  if (anchor_label == kUnlabeled)
    throw std::invalid_argument("filter_negatives: anchor must carry a real label");
  std::vector<std::size_t> out;
  out.reserve(queue.filled());
  for (std::size_t s = 0; s < queue.filled(); ++s)
    if (queue.label(s) != anchor_label) out.push_back(s);
  return out;
}

LossBreakdown contrast(const EmbeddingVector& q, const EmbeddingVector& k_pos,
                       const NegativeQueue& queue, std::span<const std::size_t> slots, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("contrastive loss: temperature must be positive");
  const std::size_t dim = q.dim();
  if (k_pos.dim() != dim || queue.dim() != dim)
    throw std::invalid_argument("contrastive loss: dimension mismatch (q " + std::to_string(dim) +
                                ", k_pos " + std::to_string(k_pos.dim()) + ", queue " +
                                std::to_string(queue.dim()) + ")");

  LossBreakdown out;
  const double pos_logit = dot(q, k_pos) / tau;
  out.kappa = std::exp(pos_logit);
  out.active_negatives = slots.size();
  out.negative_logits.resize(slots.size());
  out.grad_q = EmbeddingVector(std::vector<double>(dim, 0.0), false);
  if (slots.empty()) return out;

  double max_logit = pos_logit;
  for (std::size_t j = 0; j < slots.size(); ++j) {
    const auto key = queue.key(slots[j]);
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) s += q.values[i] * key[static_cast<Eigen::Index>(i)];
    out.negative_logits[j] = s / tau;
    max_logit = std::max(max_logit, out.negative_logits[j]);
  }

  // loss = logsumexp(all) - pos_logit, written as a shift plus log1p of the
  // non-max terms so tiny losses keep full relative precision.
  const double pos_weight = std::exp(pos_logit - max_logit);
  std::vector<double> weights(slots.size());
  double sum = pos_weight;
  for (std::size_t j = 0; j < slots.size(); ++j) {
    weights[j] = std::exp(out.negative_logits[j] - max_logit);
    sum += weights[j];
  }
  if (pos_logit == max_logit) {
    double neg_sum = 0.0;
    for (double w : weights) neg_sum += w;
    out.loss = std::log1p(neg_sum);
  } else {
    out.loss = (max_logit - pos_logit) + std::log(sum);
  }

  // grad_q = (1/tau) * sum_m p_m (k_m - k_pos), p = softmax over [pos, negs].
  auto& g = out.grad_q.values;
  for (std::size_t j = 0; j < slots.size(); ++j) {
    const double p = weights[j] / sum;
    const auto key = queue.key(slots[j]);
    for (std::size_t i = 0; i < dim; ++i) g[i] += p * (key[static_cast<Eigen::Index>(i)] - k_pos.values[i]);
  }
  for (auto& x : g) x /= tau;
  return out;
}

LossBreakdown loss_self(const EmbeddingVector& q, const EmbeddingVector& k_pos,
                        const NegativeQueue& queue, double tau) {
  if (queue.empty()) throw std::invalid_argument("loss_self: negative queue is empty");
  std::vector<std::size_t> slots(queue.filled());
  std::iota(slots.begin(), slots.end(), std::size_t{0});
  return contrast(q, k_pos, queue, slots, tau);
}

LossBreakdown loss_full(const EmbeddingVector& q, const EmbeddingVector& k_pos,
                        const NegativeQueue& queue, Label anchor_label, double tau) {
  if (queue.empty()) throw std::invalid_argument("loss_full: negative queue is empty");
  const auto slots = filter_negatives(queue, anchor_label);
  return contrast(q, k_pos, queue, slots, tau);
}

SemiResult loss_semi(std::span<const SemiSample> batch, const NegativeQueue& queue_d,
                     const NegativeQueue& queue_u, double tau) {
  SemiResult res;
  res.per_sample.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    if (s.mask.labeled()) {
      if (queue_d.empty())
        throw std::invalid_argument("loss_semi: sample " + std::to_string(i) +
                                    " is labeled but the labeled queue is empty");
      res.per_sample.push_back(loss_full(s.q, s.k_pos, queue_d, *s.mask.label, tau));
    } else {
      if (queue_u.empty())
        throw std::invalid_argument("loss_semi: sample " + std::to_string(i) +
                                    " is unlabeled but the unlabeled queue is empty");
      res.per_sample.push_back(loss_self(s.q, s.k_pos, queue_u, tau));
    }
    res.total += res.per_sample.back().loss;
  }
  return res;
}

LossBreakdown evaluate(const LossInstance& inst) {
  if (inst.queue == nullptr && !(inst.kind == LossKind::Semi && !inst.label))
    throw std::invalid_argument("loss instance: missing queue");
  switch (inst.kind) {
    case LossKind::Self:
      return loss_self(inst.q, inst.k_pos, *inst.queue, inst.tau);
    case LossKind::Full:
      if (!inst.label) throw std::invalid_argument("loss instance: full loss needs a label");
      return loss_full(inst.q, inst.k_pos, *inst.queue, *inst.label, inst.tau);
    case LossKind::Semi: {
      const NegativeQueue* qu = inst.queue_u ? inst.queue_u : inst.queue;
      const NegativeQueue* qd = inst.queue ? inst.queue : qu;
      SemiSample s{inst.q, inst.k_pos, LabelMask{inst.label}};
      auto r = loss_semi(std::span<const SemiSample>(&s, 1), *qd, *qu, inst.tau);
      return std::move(r.per_sample.front());
    }
  }
  throw std::logic_error("unreachable");
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double loss_grad_check(const LossInstance& inst, double h) {
  const LossBreakdown base = evaluate(inst);
  double worst = 0.0;
  LossInstance probe = inst;
  for (std::size_t i = 0; i < inst.q.dim(); ++i) {
    probe.q = inst.q;
    probe.q.values[i] += h;
    const double up = evaluate(probe).loss;
    probe.q.values[i] = inst.q.values[i] - h;
    const double down = evaluate(probe).loss;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, relative_error(base.grad_q.values[i], numeric));
  }
  return worst;
}

}  // namespace clab
