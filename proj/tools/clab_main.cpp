// clab: contrastive pre-training lab command line.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clab/augment.hpp"
#include "clab/checkpoint.hpp"
#include "clab/config.hpp"
#include "clab/dataset.hpp"
#include "clab/gradcheck.hpp"
#include "clab/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool no_plots = false;
  std::optional<double> label_fraction;
  std::optional<std::string> aug;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "key=value experiment config file");
  cmd->add_option("--seed", f.seed, "root seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--no-plots", f.no_plots, "skip SVG output");
  cmd->add_option("--label-fraction", f.label_fraction, "fraction of labeled samples in [0,1]")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--aug", f.aug, "augmentation")
      ->check(CLI::IsMember({"none", "erasing", "cutout", "cutmix", "mixup"}));
}

clab::ExperimentConfig resolve(const CommonFlags& f) {
  clab::ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = clab::load_config(f.config_path);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out_dir = *f.out;
  if (f.no_plots) cfg.plots = false;
  if (f.label_fraction) cfg.data.label_fraction = *f.label_fraction;
  if (f.aug) cfg.aug.kind = clab::parse_augment_kind(*f.aug);
  cfg.validate();
  return cfg;
}

void print_row(const std::string& what, const clab::ProbeResult& p, const clab::MetricReport& m) {
  std::printf("%s: top1=%.2f%% top5=%.2f%% L_inv=%.6f L_div=%.6f\n", what.c_str(), p.top1, p.top5, m.l_inv,
              m.l_div);
  if (!p.warning.empty()) std::fprintf(stderr, "warning: %s\n", p.warning.c_str());
  if (m.degenerate_embeddings) std::fprintf(stderr, "warning: some embeddings were zero before normalization\n");
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(std::stoul(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive pre-training lab: InfoNCE objectives, masking/mixing augmentations, "
               "invariance/diversity metrics"};
  app.require_subcommand(1);

  CommonFlags augment_f, pretrain_f, probe_f, metrics_f, views_f, batch_f, grad_f;

  auto* augment = app.add_subcommand("augment", "apply one augmentation to a PPM image");
  add_common(augment, augment_f);
  std::string input_ppm, donor_ppm;
  std::size_t augment_views = 1;
  augment->add_option("--input", input_ppm, "source P6 image")->required()->check(CLI::ExistingFile);
  augment->add_option("--donor", donor_ppm, "donor P6 image for cutmix/mixup")->check(CLI::ExistingFile);
  augment->add_option("--views", augment_views, "number of views to write")->check(CLI::PositiveNumber);

  auto* pretrain = app.add_subcommand("pretrain", "pre-train, then probe and measure");
  add_common(pretrain, pretrain_f);

  auto* probe = app.add_subcommand("probe", "linear probe on frozen query-encoder features");
  add_common(probe, probe_f);
  std::string probe_ckpt;
  probe->add_option("--checkpoint", probe_ckpt, "CLAB1 checkpoint (default <out>/checkpoint.clab)");

  auto* metrics = app.add_subcommand("metrics", "invariance and diversity of augmented views");
  add_common(metrics, metrics_f);
  std::string metrics_ckpt;
  metrics->add_option("--checkpoint", metrics_ckpt, "CLAB1 checkpoint (default <out>/checkpoint.clab)");

  auto* ablate_views = app.add_subcommand("ablate-views", "one run per number of views");
  add_common(ablate_views, views_f);
  std::string view_list = "2,3,4";
  ablate_views->add_option("--list", view_list, "comma-separated view counts");

  auto* ablate_batch = app.add_subcommand("ablate-batch", "one run per batch size");
  add_common(ablate_batch, batch_f);
  std::string batch_list = "32,64,128,256,512,1024";
  ablate_batch->add_option("--list", batch_list, "comma-separated batch sizes");

  auto* gradcheck = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  add_common(gradcheck, grad_f);
  std::size_t grad_trials = 100;
  gradcheck->add_option("--trials", grad_trials, "random instances per check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*augment) {
      const auto cfg = resolve(augment_f);
      const clab::ImageTensor img = clab::read_ppm(input_ppm);
      std::vector<clab::ImageTensor> donors;
      if (!donor_ppm.empty()) donors.push_back(clab::read_ppm(donor_ppm));
      const std::size_t side = cfg.view_size ? cfg.view_size : std::min(img.height(), img.width());
      const auto set = clab::make_views(img, donors, augment_views, cfg.aug, side, clab::RngStream(cfg.seed));
      std::string meta = "view,file,lambda,rect_y,rect_x,rect_h,rect_w\n";
      for (std::size_t v = 0; v < set.views.size(); ++v) {
        const std::string name = "view_" + std::to_string(v) + ".ppm";
        clab::write_ppm(cfg.out_dir / name, set.views[v]);
        char lam[32];
        std::snprintf(lam, sizeof lam, "%.6f", set.lambdas[v]);
        if (set.mask_rects[v].empty()) meta += std::to_string(v) + "," + name + "," + lam + ",,,,\n";
        for (const auto& r : set.mask_rects[v])
          meta += std::to_string(v) + "," + name + "," + lam + "," + std::to_string(r.y) + "," +
                  std::to_string(r.x) + "," + std::to_string(r.h) + "," + std::to_string(r.w) + "\n";
      }
      clab::write_file_atomic(cfg.out_dir / "rects.csv", meta);
      std::printf("wrote %zu view(s) to %s\n", set.views.size(), cfg.out_dir.string().c_str());
    } else if (*pretrain) {
      const auto cfg = resolve(pretrain_f);
      const auto data = clab::load_dataset(cfg.data, cfg.seed);
      const auto result = clab::pretrain(cfg, data);
      clab::save_checkpoint(result.checkpoint, cfg.out_dir / "checkpoint.clab");
      clab::emit_report(result.report, clab::to_string(cfg.aug.kind), data.size() / cfg.train.batch_size,
                        cfg.out_dir, cfg.plots);
      print_row("pretrain", result.report.probe, result.report.metrics);
      std::printf("wall clock %.2fs, %llu steps\n", result.report.wall_clock_seconds,
                  static_cast<unsigned long long>(result.checkpoint.step));
    } else if (*probe) {
      const auto cfg = resolve(probe_f);
      const auto data = clab::load_dataset(cfg.data, cfg.seed);
      const auto ckpt = clab::load_checkpoint(probe_ckpt.empty() ? cfg.out_dir / "checkpoint.clab" : fs::path(probe_ckpt));
      const auto p = clab::run_probe(cfg, data, ckpt);
      char buf[128];
      std::snprintf(buf, sizeof buf, "top1,top5\n%.4f,%.4f\n", p.top1, p.top5);
      clab::write_file_atomic(cfg.out_dir / "probe.csv", std::string(buf));
      std::printf("probe: top1=%.2f%% top5=%.2f%% (%zu iterations)\n", p.top1, p.top5, p.iterations);
      if (!p.warning.empty()) std::fprintf(stderr, "warning: %s\n", p.warning.c_str());
    } else if (*metrics) {
      const auto cfg = resolve(metrics_f);
      const auto data = clab::load_dataset(cfg.data, cfg.seed);
      const auto ckpt =
          clab::load_checkpoint(metrics_ckpt.empty() ? cfg.out_dir / "checkpoint.clab" : fs::path(metrics_ckpt));
      const auto m = clab::run_metrics(cfg, data, ckpt);
      clab::write_file_atomic(cfg.out_dir / "metrics.csv", clab::format_metrics_csv(m));
      std::printf("metrics: L_inv=%.6f L_div=%.6f (N=%zu, V=%zu, sigma=%g)\n", m.l_inv, m.l_div, m.anchors,
                  m.views, m.sigma);
      if (m.degenerate_embeddings) std::fprintf(stderr, "warning: some embeddings were zero before normalization\n");
    } else if (*ablate_views) {
      const auto cfg = resolve(views_f);
      const auto data = clab::load_dataset(cfg.data, cfg.seed);
      const auto rows = clab::ablate_views(cfg, data, parse_list(view_list));
      clab::emit_table(rows, cfg.out_dir / "ablate_views.csv");
      std::cout << clab::format_table_csv(rows);
    } else if (*ablate_batch) {
      const auto cfg = resolve(batch_f);
      const auto data = clab::load_dataset(cfg.data, cfg.seed);
      const auto rows = clab::ablate_batch(cfg, data, parse_list(batch_list));
      clab::emit_table(rows, cfg.out_dir / "ablate_batch.csv");
      std::cout << clab::format_table_csv(rows);
    } else if (*gradcheck) {
      const auto cfg = resolve(grad_f);
      const auto rows = clab::run_gradcheck(grad_trials, cfg.seed);
      std::string csv = "check,trials,max_rel_error\n";
      bool ok = true;
      for (const auto& r : rows) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s,%zu,%.3e\n", r.check.c_str(), r.trials, r.max_rel_error);
        csv += buf;
        std::printf("%-18s max rel err %.3e %s\n", r.check.c_str(), r.max_rel_error,
                    r.max_rel_error < 1e-4 ? "ok" : "FAIL");
        ok = ok && r.max_rel_error < 1e-4;
      }
      clab::write_file_atomic(cfg.out_dir / "gradcheck.csv", csv);
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
