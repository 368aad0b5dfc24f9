#include "clab/encoder.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace clab {

namespace {

void check_sizes(std::span<const std::size_t> sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("encoder: need at least input and output sizes");
  for (auto s : sizes)
    if (s == 0) throw std::invalid_argument("encoder: zero-width layer");
}

inline std::uint64_t mix(std::uint64_t h, double v) {
  h ^= std::bit_cast<std::uint64_t>(v);
  h *= 0x100000001B3ull;
  return h ^ (h >> 29);
}

}  // namespace

EncoderParams EncoderParams::zeros(std::span<const std::size_t> sizes) {
  check_sizes(sizes);
  EncoderParams p;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const auto out = static_cast<Eigen::Index>(sizes[i + 1]);
    const auto in = static_cast<Eigen::Index>(sizes[i]);
    p.layers.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  return p;
}

EncoderParams EncoderParams::init(std::span<const std::size_t> sizes, RngStream rng) {
  EncoderParams p = zeros(sizes);
  for (auto& layer : p.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in_dim()));
    // Row-major fill order keeps draws independent of Eigen's storage order.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        layer.weight(r, c) = rng.uniform(-bound, bound);
  }
  return p;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<std::size_t> EncoderParams::sizes() const {
  std::vector<std::size_t> s;
  if (layers.empty()) return s;
  s.push_back(layers.front().in_dim());
  for (const auto& l : layers) s.push_back(l.out_dim());
  return s;
}

void EncoderParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("encoder: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.weight.rows())
      throw std::invalid_argument("encoder: layer " + std::to_string(i) + " bias length mismatch");
    if (i > 0 && l.in_dim() != layers[i - 1].out_dim())
      throw std::invalid_argument("encoder: layer " + std::to_string(i) + " input " +
                                  std::to_string(l.in_dim()) + " does not chain with output " +
                                  std::to_string(layers[i - 1].out_dim()));
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw std::invalid_argument("encoder: layer " + std::to_string(i) + " has non-finite values");
  }
}

bool EncoderParams::same_shape(const EncoderParams& other) const {
  return sizes() == other.sizes();
}

std::uint64_t EncoderParams::digest() const {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const auto& l : layers) {
    h = mix(h, static_cast<double>(l.weight.rows()));
    h = mix(h, static_cast<double>(l.weight.cols()));
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) h = mix(h, l.weight.data()[i]);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) h = mix(h, l.bias[i]);
  }
  return h;
}

bool EncoderParams::operator==(const EncoderParams& other) const {
  if (!same_shape(other)) return false;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].weight != other.layers[i].weight || layers[i].bias != other.layers[i].bias)
      return false;
  return true;
}

GradBuffer GradBuffer::zeros_like(const EncoderParams& params) {
  GradBuffer g;
  for (const auto& l : params.layers)
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  return g;
}

bool GradBuffer::congruent_with(const EncoderParams& params) const {
  if (layers.size() != params.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != params.layers[i].weight.rows() ||
        layers[i].weight.cols() != params.layers[i].weight.cols() ||
        layers[i].bias.size() != params.layers[i].bias.size())
      return false;
  }
  return true;
}

double GradBuffer::max_abs() const {
  double m = 0.0;
  for (const auto& l : layers) {
    if (l.weight.size() > 0) m = std::max(m, l.weight.cwiseAbs().maxCoeff());
    if (l.bias.size() > 0) m = std::max(m, l.bias.cwiseAbs().maxCoeff());
  }
  return m;
}

Eigen::MatrixXd images_to_matrix(std::span<const ImageTensor> images) {
  if (images.empty()) return {};
  const auto dim = static_cast<Eigen::Index>(images.front().size());
  Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(images.size()));
  for (std::size_t j = 0; j < images.size(); ++j) {
    if (static_cast<Eigen::Index>(images[j].size()) != dim)
      throw std::invalid_argument("images_to_matrix: image " + std::to_string(j) + " has shape " +
                                  images[j].shape_string() + ", expected " +
                                  std::to_string(dim) + " values");
    const auto src = images[j].data();
    for (Eigen::Index i = 0; i < dim; ++i) m(i, static_cast<Eigen::Index>(j)) = src[i];
  }
  return m;
}

ActivationRecord forward_record(const EncoderParams& params, const Eigen::MatrixXd& inputs) {
  if (params.layers.empty()) throw std::invalid_argument("forward: encoder has no layers");
  if (static_cast<std::size_t>(inputs.rows()) != params.input_dim())
    throw std::invalid_argument("forward: input dim " + std::to_string(inputs.rows()) +
                                " does not match encoder input " + std::to_string(params.input_dim()));
  ActivationRecord rec;
  rec.params_digest = params.digest();
  rec.input = inputs;
  const std::size_t L = params.layers.size();
  const Eigen::MatrixXd* x = &rec.input;
  for (std::size_t i = 0; i < L; ++i) {
    const auto& layer = params.layers[i];
    Eigen::MatrixXd z = layer.weight * (*x);
    z.colwise() += layer.bias;
    rec.pre.push_back(std::move(z));
    if (i + 1 < L) {
      rec.post.push_back(rec.pre.back().cwiseMax(0.0));
      x = &rec.post.back();
    }
  }
  const Eigen::MatrixXd& z = rec.pre.back();
  rec.head_norms = z.colwise().norm().transpose();
  rec.output = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    if (rec.head_norms[j] > kNormEpsilon) rec.output.col(j) = z.col(j) / rec.head_norms[j];
  return rec;
}

ForwardResult forward(const EncoderParams& params, const Eigen::MatrixXd& inputs) {
  ForwardResult res;
  res.record = forward_record(params, inputs);
  const auto& out = res.record.output;
  std::vector<EmbeddingVector> rows;
  rows.reserve(static_cast<std::size_t>(out.cols()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    EmbeddingVector v(std::vector<double>(out.col(j).data(), out.col(j).data() + out.rows()),
                      res.record.head_norms[j] > kNormEpsilon);
    rows.push_back(std::move(v));
  }
  // Mixed flags are possible (some zero rows); keep the batch invariant by
  // clearing the flag on every row when any row is degenerate.
  bool all_normalized = true;
  for (const auto& r : rows) all_normalized = all_normalized && r.normalized;
  if (!all_normalized)
    for (auto& r : rows) r.normalized = false;
  res.embeddings = EmbeddingBatch(std::move(rows));
  return res;
}

ForwardResult forward(const EncoderParams& params, std::span<const ImageTensor> images) {
  return forward(params, images_to_matrix(images));
}

GradBuffer backward(const EncoderParams& params, const ActivationRecord& record,
                    const Eigen::MatrixXd& upstream) {
  if (record.params_digest != params.digest() || record.pre.size() != params.layers.size())
    throw std::invalid_argument("backward: activation record is stale or from another encoder");
  if (upstream.rows() != record.output.rows() || upstream.cols() != record.output.cols())
    throw std::invalid_argument("backward: upstream gradient is " + std::to_string(upstream.rows()) +
                                "x" + std::to_string(upstream.cols()) + ", expected " +
                                std::to_string(record.output.rows()) + "x" +
                                std::to_string(record.output.cols()));

  // Through the normalizing head: dL/dz = (I - q q^T) g / ||z||.
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(upstream.rows(), upstream.cols());
  for (Eigen::Index j = 0; j < upstream.cols(); ++j) {
    const double n = record.head_norms[j];
    if (!(n > kNormEpsilon)) continue;
    const auto q = record.output.col(j);
    const auto g = upstream.col(j);
    grad.col(j) = (g - q * q.dot(g)) / n;
  }

  GradBuffer out = GradBuffer::zeros_like(params);
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    if (i + 1 < params.layers.size())
      grad = grad.cwiseProduct((record.pre[i].array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd& prev = i == 0 ? record.input : record.post[i - 1];
    out.layers[i].weight.noalias() = grad * prev.transpose();
    out.layers[i].bias = grad.rowwise().sum();
    if (i > 0) grad = params.layers[i].weight.transpose() * grad;
  }
  return out;
}

GradBuffer backward(const EncoderParams& params, const ActivationRecord& record,
                    std::span<const EmbeddingVector> upstream) {
  const Eigen::Index dim = record.output.rows();
  Eigen::MatrixXd g(dim, static_cast<Eigen::Index>(upstream.size()));
  for (std::size_t j = 0; j < upstream.size(); ++j) {
    if (static_cast<Eigen::Index>(upstream[j].dim()) != dim)
      throw std::invalid_argument("backward: upstream row " + std::to_string(j) + " has dim " +
                                  std::to_string(upstream[j].dim()) + ", expected " +
                                  std::to_string(dim));
    for (Eigen::Index i = 0; i < dim; ++i) g(i, static_cast<Eigen::Index>(j)) = upstream[j][i];
  }
  return backward(params, record, g);
}

EncoderParams momentum_update(const EncoderParams& key, const EncoderParams& query, double m) {
  if (!key.same_shape(query))
    throw std::invalid_argument("momentum_update: key and query encoders differ in shape");
  if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("momentum_update: m must be in [0,1]");
  EncoderParams out = key;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    out.layers[i].weight = m * key.layers[i].weight + (1.0 - m) * query.layers[i].weight;
    out.layers[i].bias = m * key.layers[i].bias + (1.0 - m) * query.layers[i].bias;
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(key_momentum >= 0.0 && key_momentum <= 1.0))
    throw std::invalid_argument("TrainConfig: key momentum must be in [0,1]");
  if (!(temperature > 0.0)) throw std::invalid_argument("TrainConfig: temperature must be positive");
  if (queue_size < 1) throw std::invalid_argument("TrainConfig: queue size must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
  if (views < 2) throw std::invalid_argument("TrainConfig: need at least 2 views");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0) || !(momentum >= 0.0))
    throw std::invalid_argument("TrainConfig: lr, weight decay and momentum must be non-negative");
}

double scheduled_lr(const TrainConfig& cfg, std::size_t epoch) {
  const double e = static_cast<double>(epoch);
  const double total = static_cast<double>(cfg.epochs);
  double lr = cfg.lr;
  if (e >= 0.6 * total) lr *= 0.1;
  if (e >= 0.8 * total) lr *= 0.1;
  return lr;
}

SgdResult sgd_step(const EncoderParams& params, const GradBuffer& grads, const GradBuffer& velocity,
                   const TrainConfig& cfg) {
  if (!grads.congruent_with(params) || !velocity.congruent_with(params))
    throw std::invalid_argument("sgd_step: gradient or velocity shape does not match parameters");
  SgdResult res{params, velocity};
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& g = grads.layers[i];
    if (!g.weight.allFinite() || !g.bias.allFinite())
      throw std::runtime_error("sgd_step: non-finite gradient in layer " + std::to_string(i));
    auto& v = res.velocity.layers[i];
    auto& p = res.params.layers[i];
    v.weight = cfg.momentum * v.weight + (g.weight + cfg.weight_decay * p.weight);
    v.bias = cfg.momentum * v.bias + (g.bias + cfg.weight_decay * p.bias);
    p.weight -= cfg.lr * v.weight;
    p.bias -= cfg.lr * v.bias;
  }
  return res;
}

}  // namespace clab
