#include "clab/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "clab/parallel.hpp"

namespace clab {

void MetricConfig::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("MetricConfig: sigma must be positive");
  if (views < 2) throw std::invalid_argument("MetricConfig: diversity needs at least 2 views");
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

std::vector<double> invariance_per_anchor(const EmbeddingBatch& anchors, const ViewEmbeddings& views) {
  if (anchors.count() != views.size())
    throw std::invalid_argument("invariance: " + std::to_string(anchors.count()) + " anchors but " +
                                std::to_string(views.size()) + " view sets");
  std::vector<double> out(anchors.count());
  std::string zero_anchors;
  for (std::size_t i = 0; i < anchors.count(); ++i) {
    const double self = dot(anchors[i], anchors[i]);
    if (self == 0.0) {
      zero_anchors += (zero_anchors.empty() ? "" : ", ") + std::to_string(i);
      continue;
    }
    if (views[i].empty()) throw std::invalid_argument("invariance: anchor " + std::to_string(i) + " has no views");
    double s = 0.0;
    for (const auto& v : views[i]) s += dot(v, anchors[i]) / self;
    out[i] = s / static_cast<double>(views[i].size());
  }
  if (!zero_anchors.empty())
    throw std::invalid_argument("invariance: zero self-similarity for anchors " + zero_anchors);
  return out;
}

double invariance(const EmbeddingBatch& anchors, const ViewEmbeddings& views) {
  const auto per = invariance_per_anchor(anchors, views);
  return mean(per);
}

std::vector<double> diversity_per_anchor(const ViewEmbeddings& views, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("diversity: sigma must be positive");
  std::vector<double> out(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    const std::size_t V = views[i].size();
    if (V < 2)
      throw std::invalid_argument("diversity: anchor " + std::to_string(i) + " has " +
                                  std::to_string(V) + " views, need at least 2");
    double s = 0.0;
    for (std::size_t v = 0; v < V; ++v)
      for (std::size_t w = 0; w < V; ++w)
        if (w != v) s += std::exp(dot(views[i][v], views[i][w]) / sigma);
    out[i] = s / static_cast<double>(V * (V - 1));
  }
  return out;
}

double diversity(const ViewEmbeddings& views, double sigma) {
  const auto per = diversity_per_anchor(views, sigma);
  return mean(per);
}

namespace {

std::vector<EmbeddingVector> encode_columns(const ActivationRecord& rec, bool normalized) {
  const Eigen::MatrixXd& m = normalized ? rec.output : rec.head_input();
  std::vector<EmbeddingVector> rows;
  rows.reserve(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    rows.emplace_back(std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows()),
                      normalized && rec.head_norms[j] > kNormEpsilon);
  return rows;
}

}  // namespace

MetricReport evaluate_views(std::span<const ImageTensor> images,
                            std::span<const std::size_t> anchor_indices, const EncoderParams& encoder,
                            const AugmentSpec& spec, const MetricConfig& cfg, RngStream rng) {
  cfg.validate();
  if (images.empty() || anchor_indices.empty())
    throw std::invalid_argument("evaluate_views: no anchors to evaluate");
  const std::size_t out_size =
      cfg.view_size ? cfg.view_size : std::min(images.front().height(), images.front().width());
  const std::size_t N = anchor_indices.size();
  const std::size_t V = cfg.views;

  std::vector<ImageTensor> anchor_imgs(N);
  std::vector<ViewSet> sets(N);
  parallel_for(N, [&](std::size_t i) {
    const std::size_t idx = anchor_indices[i];
    anchor_imgs[i] = center_view(images[idx], out_size);
    sets[i] = make_views(images[idx], images, V, spec, out_size, rng.fork(idx), idx);
  });

  std::vector<ImageTensor> view_imgs;
  view_imgs.reserve(N * V);
  for (auto& s : sets)
    for (auto& v : s.views) view_imgs.push_back(std::move(v));

  const auto anchor_rec = forward_record(encoder, images_to_matrix(anchor_imgs));
  const auto view_rec = forward_record(encoder, images_to_matrix(view_imgs));
  auto anchor_rows = encode_columns(anchor_rec, cfg.normalized);
  auto view_rows = encode_columns(view_rec, cfg.normalized);

  MetricReport rep;
  rep.anchors = N;
  rep.views = V;
  rep.sigma = cfg.sigma;
  for (Eigen::Index j = 0; j < anchor_rec.head_norms.size(); ++j)
    rep.degenerate_embeddings |= !(anchor_rec.head_norms[j] > kNormEpsilon);
  for (Eigen::Index j = 0; j < view_rec.head_norms.size(); ++j)
    rep.degenerate_embeddings |= !(view_rec.head_norms[j] > kNormEpsilon);

  ViewEmbeddings grouped(N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t v = 0; v < V; ++v) grouped[i].push_back(std::move(view_rows[i * V + v]));
  if (rep.degenerate_embeddings)
    for (auto& r : anchor_rows) r.normalized = false;
  const EmbeddingBatch anchors(std::move(anchor_rows));

  rep.per_anchor_inv = invariance_per_anchor(anchors, grouped);
  rep.per_anchor_div = diversity_per_anchor(grouped, cfg.sigma);
  rep.l_inv = mean(rep.per_anchor_inv);
  rep.l_div = mean(rep.per_anchor_div);
  return rep;
}

}  // namespace clab
