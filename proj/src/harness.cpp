#include "clab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "clab/parallel.hpp"

namespace clab {

namespace {

// Root-stream fork labels. Fixed so that runs differing only in one knob
// share every other random draw.
enum StreamLabel : std::uint64_t {
  kInitStream = 1,
  kQueueStream = 2,
  kPartitionStream = 3,
  kShuffleStream = 4,
  kViewStream = 5,
  kMetricStream = 6,
  kProbeStream = 7,
};

std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

EmbeddingVector column(const Eigen::MatrixXd& m, Eigen::Index j, bool normalized) {
  return EmbeddingVector(std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows()), normalized);
}

}  // namespace

std::size_t view_side(const ExperimentConfig& cfg, const Dataset& dataset) {
  if (dataset.images.empty()) throw std::invalid_argument("dataset is empty");
  const std::size_t side = std::min(dataset.images.front().height(), dataset.images.front().width());
  return cfg.view_size ? cfg.view_size : side;
}

std::vector<std::size_t> encoder_sizes(const ExperimentConfig& cfg, const Dataset& dataset) {
  const std::size_t side = view_side(cfg, dataset);
  std::vector<std::size_t> sizes{side * side * dataset.images.front().channels()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(cfg.embed_dim);
  return sizes;
}

Checkpoint initial_checkpoint(const ExperimentConfig& cfg, const Dataset& dataset) {
  const auto sizes = encoder_sizes(cfg, dataset);
  Checkpoint c;
  c.query = EncoderParams::init(sizes, RngStream(cfg.seed).fork(kInitStream));
  c.key = c.query;
  c.velocity = GradBuffer::zeros_like(c.query);
  c.step = 0;
  return c;
}

PretrainResult pretrain(const ExperimentConfig& cfg, const Dataset& dataset, const PretrainOptions& opts) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t N = dataset.size();
  const std::size_t B = cfg.train.batch_size;
  if (B > N)
    throw std::invalid_argument("pretrain: batch size " + std::to_string(B) + " exceeds dataset size " +
                                std::to_string(N));
  const std::size_t V = cfg.train.views;
  const std::size_t side = view_side(cfg, dataset);
  const RngStream root(cfg.seed);

  PretrainResult res;
  res.checkpoint = initial_checkpoint(cfg, dataset);
  res.report.config_echo = cfg.to_text();
  Checkpoint& ck = res.checkpoint;
  const std::size_t dim = cfg.embed_dim;

  // Both queues start from the same seeded content.
  NegativeQueue queue_d = NegativeQueue::random(cfg.train.queue_size, dim, root.fork(kQueueStream));
  NegativeQueue queue_u = queue_d;
  const auto labeled = labeled_partition(N, cfg.data.label_fraction, root.fork(kPartitionStream));

  const std::size_t batches_per_epoch = N / B;
  const std::span<const ImageTensor> images(dataset.images);

  for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    TrainConfig step_cfg = cfg.train;
    step_cfg.lr = scheduled_lr(cfg.train, epoch);
    const auto order = shuffled_indices(N, root.fork(kShuffleStream).fork(epoch));
    double epoch_sum = 0.0;

    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const RngStream step_rng = root.fork(kViewStream).fork(ck.step);
      std::vector<ViewSet> sets(B);
      parallel_for(B, [&](std::size_t s) {
        const std::size_t idx = order[b * B + s];
        sets[s] = make_views(dataset.images[idx], images, V, cfg.aug, side, step_rng.fork(s), idx);
      });

      // View 0 is the key; views 1..V-1 are queries against it.
      std::vector<ImageTensor> key_imgs, query_imgs;
      key_imgs.reserve(B);
      query_imgs.reserve(B * (V - 1));
      for (auto& s : sets) {
        key_imgs.push_back(std::move(s.views[0]));
        for (std::size_t v = 1; v < V; ++v) query_imgs.push_back(std::move(s.views[v]));
      }
      const ActivationRecord qrec = forward_record(ck.query, images_to_matrix(query_imgs));
      const ActivationRecord krec = forward_record(ck.key, images_to_matrix(key_imgs));

      std::vector<Label> sample_labels(B, kUnlabeled);
      std::vector<SemiSample> samples;
      samples.reserve(B * (V - 1));
      for (std::size_t s = 0; s < B; ++s) {
        const std::size_t idx = order[b * B + s];
        LabelMask mask;
        if (labeled[idx]) {
          mask.label = dataset.labels[idx];
          sample_labels[s] = dataset.labels[idx];
        }
        const auto s_col = static_cast<Eigen::Index>(s);
        const EmbeddingVector k = column(krec.output, s_col, krec.head_norms[s_col] > kNormEpsilon);
        for (std::size_t v = 1; v < V; ++v) {
          const auto q_col = static_cast<Eigen::Index>(s * (V - 1) + v - 1);
          samples.push_back({column(qrec.output, q_col, qrec.head_norms[q_col] > kNormEpsilon), k, mask});
        }
      }
      const SemiResult loss = loss_semi(samples, queue_d, queue_u, cfg.train.temperature);
      const double batch_loss = loss.total / static_cast<double>(B);
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("pretrain: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(b));

      Eigen::MatrixXd upstream(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(samples.size()));
      for (std::size_t j = 0; j < samples.size(); ++j)
        for (std::size_t i = 0; i < dim; ++i)
          upstream(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              loss.per_sample[j].grad_q.values[i] / static_cast<double>(B);

      const GradBuffer grads = backward(ck.query, qrec, upstream);
      SgdResult sgd = sgd_step(ck.query, grads, ck.velocity, step_cfg);
      ck.query = std::move(sgd.params);
      ck.velocity = std::move(sgd.velocity);
      ck.key = momentum_update(ck.key, ck.query, cfg.train.key_momentum);
      ++ck.step;

      // Labeled anchors feed the labeled queue, the rest the unlabeled one.
      std::vector<Eigen::Index> to_d, to_u;
      for (std::size_t s = 0; s < B; ++s) {
        const auto col = static_cast<Eigen::Index>(s);
        if (!(krec.head_norms[col] > kNormEpsilon)) continue;
        (labeled[order[b * B + s]] ? to_d : to_u).push_back(col);
      }
      auto push = [&](NegativeQueue& q, const std::vector<Eigen::Index>& cols, bool with_labels) {
        if (cols.empty()) return;
        Eigen::MatrixXd keys(krec.output.rows(), static_cast<Eigen::Index>(cols.size()));
        std::vector<Label> labels(cols.size(), kUnlabeled);
        for (std::size_t j = 0; j < cols.size(); ++j) {
          keys.col(static_cast<Eigen::Index>(j)) = krec.output.col(cols[j]);
          if (with_labels) labels[j] = sample_labels[static_cast<std::size_t>(cols[j])];
        }
        q.push(keys, labels);
      };
      push(queue_d, to_d, true);
      push(queue_u, to_u, false);

      res.report.batch_losses.push_back(batch_loss);
      epoch_sum += batch_loss;
    }
    res.report.epoch_losses.push_back(batches_per_epoch ? epoch_sum / static_cast<double>(batches_per_epoch) : 0.0);
  }

  if (opts.evaluate) {
    res.report.metrics = run_metrics(cfg, dataset, ck);
    res.report.probe = run_probe(cfg, dataset, ck);
  }
  res.report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

MetricReport run_metrics(const ExperimentConfig& cfg, const Dataset& dataset, const Checkpoint& ckpt) {
  const RngStream rng = RngStream(cfg.seed).fork(kMetricStream);
  auto order = shuffled_indices(dataset.size(), rng.fork(0));
  order.resize(std::min(order.size(), cfg.metrics.anchors));
  MetricConfig mc = cfg.metrics;
  mc.view_size = view_side(cfg, dataset);
  const EncoderParams& enc = mc.encoder == AnchorEncoder::Query ? ckpt.query : ckpt.key;
  MetricReport rep = evaluate_views(dataset.images, order, enc, cfg.aug, mc, rng.fork(1));
  rep.tau = cfg.train.temperature;
  return rep;
}

ProbeResult run_probe(const ExperimentConfig& cfg, const Dataset& dataset, const Checkpoint& ckpt) {
  return linear_probe(ckpt.query, dataset, view_side(cfg, dataset), RngStream(cfg.seed).fork(kProbeStream),
                      cfg.probe_max_iters);
}

ProbeResult linear_probe(const EncoderParams& encoder, const Dataset& dataset, std::size_t view_size,
                         RngStream rng, std::size_t max_iters) {
  const std::size_t N = dataset.size();
  if (N < 2) throw std::invalid_argument("linear_probe: need at least two samples");
  if (dataset.labels.size() != N) throw std::invalid_argument("linear_probe: dataset is unlabeled");
  std::size_t C = dataset.num_classes;
  for (Label y : dataset.labels) {
    if (y < 0) throw std::invalid_argument("linear_probe: sample without a valid label");
    C = std::max(C, static_cast<std::size_t>(y) + 1);
  }

  std::vector<ImageTensor> centers(N);
  parallel_for(N, [&](std::size_t i) { centers[i] = center_view(dataset.images[i], view_size); });
  const ActivationRecord rec = forward_record(encoder, images_to_matrix(centers));
  const Eigen::Index d = rec.output.rows();

  const auto order = shuffled_indices(N, rng);
  const std::size_t n_train = std::max<std::size_t>(1, std::min(N - 1, (N * 8) / 10));
  const std::size_t n_test = N - n_train;

  // Features with a trailing bias coordinate, one column per sample.
  auto gather = [&](std::size_t from, std::size_t count, Eigen::MatrixXd& X, std::vector<Label>& y) {
    X.resize(d + 1, static_cast<Eigen::Index>(count));
    y.resize(count);
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t idx = order[from + j];
      X.col(static_cast<Eigen::Index>(j)).head(d) = rec.output.col(static_cast<Eigen::Index>(idx));
      X(d, static_cast<Eigen::Index>(j)) = 1.0;
      y[j] = dataset.labels[idx];
    }
  };
  Eigen::MatrixXd X_train, X_test;
  std::vector<Label> y_train, y_test;
  gather(0, n_train, X_train, y_train);
  gather(n_train, n_test, X_test, y_test);

  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(n_train));
  for (std::size_t j = 0; j < n_train; ++j) Y(y_train[j], static_cast<Eigen::Index>(j)) = 1.0;

  // Features have norm <= sqrt(2), so the loss gradient is 1-Lipschitz and a
  // unit step is stable.
  constexpr double step = 1.0;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(C), d + 1);
  ProbeResult out;
  for (out.iterations = 0; out.iterations < max_iters; ++out.iterations) {
    Eigen::MatrixXd logits = W * X_train;
    const Eigen::RowVectorXd mx = logits.colwise().maxCoeff();
    logits.rowwise() -= mx;
    Eigen::MatrixXd p = logits.array().exp().matrix();
    const Eigen::RowVectorXd z = p.colwise().sum();
    p.array().rowwise() /= z.array();
    const Eigen::MatrixXd grad = (p - Y) * X_train.transpose() / static_cast<double>(n_train);
    out.final_grad_norm = grad.norm();
    if (out.final_grad_norm < 1e-6) break;
    W -= step * grad;
  }

  const Eigen::MatrixXd scores = W * X_test;
  std::size_t hit1 = 0, hit5 = 0;
  for (std::size_t j = 0; j < n_test; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const double true_score = scores(y_test[j], col);
    std::size_t rank = 0;
    for (Eigen::Index c = 0; c < scores.rows(); ++c) {
      if (c == y_test[j]) continue;
      const double s = scores(c, col);
      if (s > true_score || (s == true_score && c < y_test[j])) ++rank;
    }
    hit1 += rank < 1;
    hit5 += rank < 5;
  }
  out.top1 = 100.0 * static_cast<double>(hit1) / static_cast<double>(n_test);
  out.top5 = 100.0 * static_cast<double>(hit5) / static_cast<double>(n_test);
  if (C < 5) {
    out.top5 = 100.0;
    out.warning = "fewer than 5 classes (" + std::to_string(C) + "); top-5 reported as 100%";
  }
  return out;
}

namespace {

TableRow run_row(const ExperimentConfig& cfg, const Dataset& dataset, std::string label) {
  const PretrainResult r = pretrain(cfg, dataset);
  return {std::move(label), r.report.probe.top1, r.report.probe.top5, r.report.metrics.l_inv,
          r.report.metrics.l_div};
}

}  // namespace

std::vector<TableRow> ablate_views(const ExperimentConfig& cfg, const Dataset& dataset,
                                   std::span<const std::size_t> view_counts) {
  std::vector<TableRow> rows;
  for (std::size_t v : view_counts) {
    if (v < 2) throw std::invalid_argument("ablate_views: every V must be >= 2");
    ExperimentConfig c = cfg;
    c.train.views = v;
    c.metrics.views = v;
    rows.push_back(run_row(c, dataset, "V=" + std::to_string(v)));
  }
  return rows;
}

std::vector<TableRow> ablate_batch(const ExperimentConfig& cfg, const Dataset& dataset,
                                   std::span<const std::size_t> batch_sizes) {
  std::vector<TableRow> rows;
  for (std::size_t n : batch_sizes) {
    if (n > dataset.size())
      throw std::invalid_argument("ablate_batch: batch size " + std::to_string(n) + " exceeds dataset size " +
                                  std::to_string(dataset.size()));
    ExperimentConfig c = cfg;
    c.train.batch_size = n;
    rows.push_back(run_row(c, dataset, "N=" + std::to_string(n)));
  }
  return rows;
}

std::string format_table_csv(std::span<const TableRow> rows) {
  std::string out = std::string(kTableHeader) + "\n";
  for (const auto& r : rows)
    out += r.config + "," + fmt(r.top1, 4) + "," + fmt(r.top5, 4) + "," + fmt(r.l_inv) + "," + fmt(r.l_div) + "\n";
  return out;
}

std::string format_loss_csv(const RunReport& report, std::size_t batches_per_epoch) {
  std::string out = "step,epoch,loss\n";
  for (std::size_t i = 0; i < report.batch_losses.size(); ++i) {
    const std::size_t epoch = batches_per_epoch ? i / batches_per_epoch : 0;
    out += std::to_string(i) + "," + std::to_string(epoch) + "," + fmt(report.batch_losses[i], 10) + "\n";
  }
  return out;
}

std::string format_metrics_csv(const MetricReport& report) {
  std::string out = "anchor,invariance,diversity\n";
  for (std::size_t i = 0; i < report.per_anchor_inv.size(); ++i)
    out += std::to_string(i) + "," + fmt(report.per_anchor_inv[i], 10) + "," +
           fmt(report.per_anchor_div[i], 10) + "\n";
  out += "mean," + fmt(report.l_inv, 10) + "," + fmt(report.l_div, 10) + "\n";
  return out;
}

std::string format_loss_svg(std::span<const double> losses) {
  constexpr double W = 640, H = 360, pad = 40;
  double lo = 0.0, hi = 1.0;
  if (!losses.empty()) {
    lo = *std::min_element(losses.begin(), losses.end());
    hi = *std::max_element(losses.begin(), losses.end());
    if (hi - lo < 1e-12) hi = lo + 1.0;
  }
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
    << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << pad << "\" y=\"" << pad - 10 << "\" font-size=\"12\">loss " << fmt(lo, 3) << " - "
    << fmt(hi, 3) << "</text>\n";
  o << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  const double n = losses.size() > 1 ? static_cast<double>(losses.size() - 1) : 1.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double x = pad + (W - 2 * pad) * static_cast<double>(i) / n;
    const double y = H - pad - (H - 2 * pad) * (losses[i] - lo) / (hi - lo);
    o << (i ? " " : "") << fmt(x, 2) << "," << fmt(y, 2);
  }
  o << "\"/>\n</svg>\n";
  return o.str();
}

void emit_report(const RunReport& report, const std::string& label, std::size_t batches_per_epoch,
                 const std::filesystem::path& dir, bool plots) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  const TableRow row{label, report.probe.top1, report.probe.top5, report.metrics.l_inv, report.metrics.l_div};
  write_file_atomic(dir / "summary.csv", format_table_csv(std::span<const TableRow>(&row, 1)));
  write_file_atomic(dir / "loss_curve.csv", format_loss_csv(report, batches_per_epoch));
  write_file_atomic(dir / "metrics.csv", format_metrics_csv(report.metrics));
  write_file_atomic(dir / "config.txt", report.config_echo);
  if (plots) write_file_atomic(dir / "loss_curve.svg", format_loss_svg(report.batch_losses));
}

void emit_table(std::span<const TableRow> rows, const std::filesystem::path& path) {
  write_file_atomic(path, format_table_csv(rows));
}

}  // namespace clab
