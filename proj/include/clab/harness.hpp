#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "clab/checkpoint.hpp"
#include "clab/config.hpp"
#include "clab/dataset.hpp"
#include "clab/metrics.hpp"

namespace clab {

struct ProbeResult {
  double top1 = 0.0;  // percent
  double top5 = 0.0;  // percent
  std::size_t iterations = 0;
  double final_grad_norm = 0.0;
  std::string warning;
};

struct RunReport {
  std::vector<double> batch_losses;  // mean per-anchor loss of every step
  std::vector<double> epoch_losses;
  MetricReport metrics;
  ProbeResult probe;
  double wall_clock_seconds = 0.0;
  std::string config_echo;
};

struct PretrainResult {
  Checkpoint checkpoint;
  RunReport report;
};

// Layer sizes for the configured encoder on `dataset`.
std::vector<std::size_t> encoder_sizes(const ExperimentConfig& cfg, const Dataset& dataset);
std::size_t view_side(const ExperimentConfig& cfg, const Dataset& dataset);
Checkpoint initial_checkpoint(const ExperimentConfig& cfg, const Dataset& dataset);

struct PretrainOptions {
  bool evaluate = true;  // run metrics and linear probe at the end
};

// MoCo-style loop. Per batch: views, query/key forward, self/full/semi
// InfoNCE chosen by the label fraction, backward + SGD on the query encoder,
// momentum update of the key encoder, queue push. Labels are only read for
// samples in the labeled partition.
PretrainResult pretrain(const ExperimentConfig& cfg, const Dataset& dataset,
                        const PretrainOptions& opts = {});

// Frozen-feature softmax regression on center-view embeddings, 80/20 seeded
// split, full-batch gradient descent until grad norm < 1e-6 or max_iters.
ProbeResult linear_probe(const EncoderParams& encoder, const Dataset& dataset, std::size_t view_size,
                         RngStream rng, std::size_t max_iters = 10000);

MetricReport run_metrics(const ExperimentConfig& cfg, const Dataset& dataset, const Checkpoint& ckpt);
ProbeResult run_probe(const ExperimentConfig& cfg, const Dataset& dataset, const Checkpoint& ckpt);

struct TableRow {
  std::string config;
  double top1 = 0.0;
  double top5 = 0.0;
  double l_inv = 0.0;
  double l_div = 0.0;
};

std::vector<TableRow> ablate_views(const ExperimentConfig& cfg, const Dataset& dataset,
                                   std::span<const std::size_t> view_counts);
std::vector<TableRow> ablate_batch(const ExperimentConfig& cfg, const Dataset& dataset,
                                   std::span<const std::size_t> batch_sizes);

// --- report emission ---------------------------------------------------

inline constexpr const char* kTableHeader = "config,top1,top5,l_inv,l_div";

std::string format_table_csv(std::span<const TableRow> rows);
std::string format_loss_csv(const RunReport& report, std::size_t batches_per_epoch);
std::string format_metrics_csv(const MetricReport& report);
std::string format_loss_svg(std::span<const double> losses);

// Writes summary.csv, loss_curve.csv, metrics.csv, config.txt, and
// loss_curve.svg unless plots are disabled.
void emit_report(const RunReport& report, const std::string& label, std::size_t batches_per_epoch,
                 const std::filesystem::path& dir, bool plots);
void emit_table(std::span<const TableRow> rows, const std::filesystem::path& path);

}  // namespace clab
