#pragma once

#include <span>
#include <vector>

#include "clab/augment.hpp"
#include "clab/encoder.hpp"
#include "clab/tensor.hpp"

namespace clab {

enum class AnchorEncoder { Query, Key };

struct MetricConfig {
  double sigma = 1.0;
  std::size_t views = 2;
  AnchorEncoder encoder = AnchorEncoder::Query;
  // When false, similarities use the raw pre-head embedding instead of the
  // l2-normalized one.
  bool normalized = true;
  std::size_t anchors = 256;  // anchors sampled by evaluate_views
  std::size_t view_size = 0;  // 0 = source image side

  void validate() const;
};

struct MetricReport {
  double l_inv = 0.0;
  double l_div = 0.0;
  std::vector<double> per_anchor_inv;
  std::vector<double> per_anchor_div;
  std::size_t anchors = 0;
  std::size_t views = 0;
  double sigma = 1.0;
  double tau = 0.0;
  // Set when any embedding had a degenerate (zero) head output.
  bool degenerate_embeddings = false;

  bool operator==(const MetricReport&) const = default;
};

// One entry per anchor, each holding that anchor's V view embeddings.
using ViewEmbeddings = std::vector<std::vector<EmbeddingVector>>;

// (1/V) sum_v S(q^v, x) / S(x, x) for each anchor. Throws listing every
// anchor whose self-similarity is zero.
std::vector<double> invariance_per_anchor(const EmbeddingBatch& anchors, const ViewEmbeddings& views);
double invariance(const EmbeddingBatch& anchors, const ViewEmbeddings& views);

// (1/(V(V-1))) sum over ordered pairs v != w of exp(S(q^v, q^w) / sigma).
std::vector<double> diversity_per_anchor(const ViewEmbeddings& views, double sigma);
double diversity(const ViewEmbeddings& views, double sigma);

double mean(std::span<const double> values);

// Encodes `anchor_indices` from center views, draws cfg.views augmented views
// per anchor with make_views (donor pool = `images`), and evaluates both
// metrics with the same encoder.
MetricReport evaluate_views(std::span<const ImageTensor> images,
                            std::span<const std::size_t> anchor_indices, const EncoderParams& encoder,
                            const AugmentSpec& spec, const MetricConfig& cfg, RngStream rng);

}  // namespace clab
