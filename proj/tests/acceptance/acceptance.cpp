// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "clab/augment.hpp"
#include "clab/checkpoint.hpp"
#include "clab/contrastive.hpp"
#include "clab/dataset.hpp"
#include "clab/gradcheck.hpp"
#include "clab/harness.hpp"
#include "clab/metrics.hpp"

using namespace clab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

NegativeQueue random_queue(std::size_t m, std::size_t dim, std::size_t classes, double unlabeled_p,
                           RngStream& rng, std::vector<Label>* labels_out = nullptr) {
  std::vector<EmbeddingVector> keys;
  std::vector<Label> labels;
  for (std::size_t i = 0; i < m; ++i) {
    keys.push_back(random_unit(dim, rng));
    labels.push_back(rng.bernoulli(unlabeled_p) ? kUnlabeled : static_cast<Label>(rng.uniform_index(classes)));
  }
  NegativeQueue q(m, dim);
  q.push(EmbeddingBatch(keys), labels);
  if (labels_out) *labels_out = labels;
  return q;
}

// Direct evaluation of -log(kappa / (kappa + sum exp(q.k_m / tau))) in long
// double, with no shifting.
long double naive_loss(const EmbeddingVector& q, const EmbeddingVector& k, const NegativeQueue& queue,
                       const std::vector<std::size_t>& slots, double tau) {
  auto ldot = [&](const std::vector<double>& a, const EmbeddingVector& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b.values[i];
    return s;
  };
  const long double kappa = std::exp(ldot(k.values, q) / tau);
  long double denom = kappa;
  for (std::size_t m : slots) denom += std::exp(ldot(queue.key_vector(m).values, q) / tau);
  return -std::log(kappa / denom);
}

double rel(double a, long double oracle) {
  const long double d = std::fabs(static_cast<long double>(a) - oracle);
  if (d == 0) return 0.0;
  return static_cast<double>(d / std::max(std::fabs(oracle), 1e-300L));
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const RngStream root(101);
  double worst = 0.0;
  for (std::size_t t = 0; t < 500; ++t) {
    RngStream rng = root.fork(t);
    const std::size_t dim = 1 + rng.uniform_index(4), m = 1 + rng.uniform_index(8);
    const double tau = rng.uniform(0.2, 2.0);
    const auto queue = random_queue(m, dim, 3, 0.2, rng);
    const auto q = random_unit(dim, rng), k = random_unit(dim, rng);
    const Label y = static_cast<Label>(rng.uniform_index(3));
    std::vector<std::size_t> all(m);
    for (std::size_t i = 0; i < m; ++i) all[i] = i;
    worst = std::max(worst, rel(loss_self(q, k, queue, tau).loss, naive_loss(q, k, queue, all, tau)));
    worst = std::max(worst, rel(loss_full(q, k, queue, y, tau).loss,
                                naive_loss(q, k, queue, filter_negatives(queue, y), tau)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 5.0,
          "500 instances, max rel err " + fmt("%.3e", worst) + ", " + fmt("%.2fs", secs)};
}

Outcome criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_gradcheck(100, 202);
  const double secs = seconds_since(t0);
  Outcome o;
  for (const auto& r : rows) {
    o.pass = o.pass && r.max_rel_error < 1e-4;
    o.detail += r.check + " " + fmt("%.2e", r.max_rel_error) + ", ";
  }
  o.pass = o.pass && secs < 30.0;
  o.detail += fmt("%.2fs", secs);
  return o;
}

Outcome criterion3() {
  const RngStream root(303);
  std::size_t failures = 0;
  for (std::size_t t = 0; t < 50; ++t) {
    RngStream rng = root.fork(t);
    const std::size_t dim = 2 + rng.uniform_index(15), m = 1 + rng.uniform_index(32), n = 1 + rng.uniform_index(16);
    const double tau = rng.uniform(0.05, 1.0);
    const auto queue = random_queue(m, dim, 4, 0.2, rng);
    std::vector<SemiSample> u, d;
    for (std::size_t i = 0; i < n; ++i) {
      const auto q = random_unit(dim, rng), k = random_unit(dim, rng);
      u.push_back({q, k, LabelMask{}});
      d.push_back({q, k, LabelMask{static_cast<Label>(rng.uniform_index(4))}});
    }
    double self_sum = 0.0, full_sum = 0.0;
    for (const auto& s : u) self_sum += loss_self(s.q, s.k_pos, queue, tau).loss;
    for (const auto& s : d) full_sum += loss_full(s.q, s.k_pos, queue, *s.mask.label, tau).loss;
    failures += loss_semi(u, queue, queue, tau).total != self_sum;
    failures += loss_semi(d, queue, queue, tau).total != full_sum;
  }
  return {failures == 0, "50 batches, " + std::to_string(failures) + " bitwise mismatches"};
}

Outcome criterion4() {
  const RngStream root(404);
  std::size_t violations = 0, strict_cases = 0;
  for (std::size_t t = 0; t < 1000; ++t) {
    RngStream rng = root.fork(t);
    const std::size_t dim = 2 + rng.uniform_index(15), m = 1 + rng.uniform_index(32);
    const double tau = rng.uniform(0.05, 2.0);
    std::vector<Label> labels;
    const auto queue = random_queue(m, dim, 5, 0.2, rng, &labels);
    const auto q = random_unit(dim, rng), k = random_unit(dim, rng);
    const Label y = static_cast<Label>(rng.uniform_index(5));
    const double full = loss_full(q, k, queue, y, tau).loss;
    const double self = loss_self(q, k, queue, tau).loss;
    const bool same_present = std::find(labels.begin(), labels.end(), y) != labels.end();
    strict_cases += same_present;
    if (same_present ? !(full < self) : !(full == self)) ++violations;
  }
  return {violations == 0, "1000 instances (" + std::to_string(strict_cases) + " with a same-label key), " +
                               std::to_string(violations) + " violations"};
}

Outcome criterion5() {
  const RngStream root(505);
  double worst_anchor = 0.0, worst_brute = 0.0;
  std::size_t bound_violations = 0;
  for (std::size_t t = 0; t < 1000; ++t) {
    RngStream rng = root.fork(t);
    const std::size_t n = 1 + rng.uniform_index(4), v = 2 + rng.uniform_index(2), dim = 1 + rng.uniform_index(3);
    const double sigma = rng.uniform(0.1, 5.0);
    std::vector<EmbeddingVector> anchors;
    ViewEmbeddings views(n), copies(n);
    for (std::size_t i = 0; i < n; ++i) {
      anchors.push_back(random_unit(dim, rng));
      for (std::size_t j = 0; j < v; ++j) {
        views[i].push_back(random_unit(dim, rng));
        copies[i].push_back(anchors[i]);
      }
    }
    const EmbeddingBatch batch(anchors);
    worst_anchor = std::max(worst_anchor, std::fabs(invariance(batch, copies) - 1.0));

    const double inv = invariance(batch, views), div = diversity(views, sigma);
    bound_violations += inv > 1.0 + 1e-9 || inv < -1.0 - 1e-9;
    bound_violations += div < std::exp(-1.0 / sigma) - 1e-9 || div > std::exp(1.0 / sigma) + 1e-9;

    long double bi = 0, bd = 0;
    for (std::size_t i = 0; i < n; ++i) {
      long double xx = 0;
      for (std::size_t d = 0; d < dim; ++d) xx += static_cast<long double>(anchors[i].values[d]) * anchors[i].values[d];
      for (std::size_t a = 0; a < v; ++a) {
        long double qx = 0;
        for (std::size_t d = 0; d < dim; ++d) qx += static_cast<long double>(views[i][a].values[d]) * anchors[i].values[d];
        bi += qx / xx;
        for (std::size_t b = 0; b < v; ++b) {
          if (a == b) continue;
          long double qq = 0;
          for (std::size_t d = 0; d < dim; ++d)
            qq += static_cast<long double>(views[i][a].values[d]) * views[i][b].values[d];
          bd += std::exp(qq / sigma);
        }
      }
    }
    bi /= static_cast<long double>(n * v);
    bd /= static_cast<long double>(n * v * (v - 1));
    worst_brute = std::max({worst_brute, static_cast<double>(std::fabs(inv - bi)),
                            static_cast<double>(std::fabs(div - bd))});
  }

  // Encoder path: constant images make every view equal its anchor.
  std::vector<ImageTensor> images;
  for (int i = 0; i < 8; ++i) images.emplace_back(16, 16, 1, 0.05f + 0.1f * static_cast<float>(i));
  const std::size_t sizes[] = {256, 32, 16};
  MetricConfig mc;
  mc.views = 3;
  const std::vector<std::size_t> idx = {0, 1, 2, 3, 4, 5, 6, 7};
  const auto rep = evaluate_views(images, idx, EncoderParams::init(sizes, RngStream(5)), AugmentSpec{}, mc,
                                  RngStream(6));
  worst_anchor = std::max(worst_anchor, std::fabs(rep.l_inv - 1.0));

  return {worst_anchor <= 1e-9 && bound_violations == 0 && worst_brute <= 1e-12,
          "|L_inv-1| at anchors " + fmt("%.1e", worst_anchor) + ", bound violations " +
              std::to_string(bound_violations) + "/2000, brute-force max diff " + fmt("%.1e", worst_brute)};
}

Outcome criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  const RngStream root(606);
  std::size_t partition = 0, range = 0, endpoints = 0, area = 0;
  auto random_image = [](std::size_t h, std::size_t w, std::size_t c, RngStream& rng) {
    ImageTensor img(h, w, c);
    for (auto& v : img.data()) v = static_cast<float>(rng.uniform());
    return img;
  };
  auto outside_equal = [](const ImageTensor& out, const ImageTensor& ref, const Rect& r) {
    for (std::size_t y = 0; y < out.height(); ++y)
      for (std::size_t x = 0; x < out.width(); ++x)
        if (!r.contains(y, x))
          for (std::size_t c = 0; c < out.channels(); ++c)
            if (out.at(y, x, c) != ref.at(y, x, c)) return false;
    return true;
  };
  auto in_range = [](const ImageTensor& img) {
    for (float v : img.data())
      if (!(v >= 0.0f && v <= 1.0f)) return false;
    return true;
  };
  for (std::size_t t = 0; t < 500; ++t) {
    RngStream rng = root.fork(t);
    const std::size_t h = 4 + rng.uniform_index(29), w = 4 + rng.uniform_index(29);
    const std::size_t c = rng.bernoulli(0.5) ? 3 : 1;
    const auto a = random_image(h, w, c, rng);
    const auto b = random_image(h, w, c, rng);
    AugmentSpec spec;
    spec.erase_prob = rng.uniform();
    spec.cutout_size = rng.uniform();
    spec.cutout_fill = rng.bernoulli(0.5) ? CutoutFill::Mean : CutoutFill::Zero;
    spec.mixup_alpha = rng.uniform(0.1, 4.0);

    const auto [er, er_rect] = random_erasing(a, spec, rng.fork(1));
    const auto [co, co_rect] = cutout(a, spec, rng.fork(2));
    const auto cm = cutmix(a, b, rng.fork(3), spec.mixup_alpha);
    partition += !outside_equal(er, a, er_rect) + !outside_equal(co, a, co_rect) + !outside_equal(cm.image, a, cm.patch);
    for (std::size_t y = cm.patch.y; y < cm.patch.y + cm.patch.h; ++y)
      for (std::size_t x = cm.patch.x; x < cm.patch.x + cm.patch.w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch) partition += cm.image.at(y, x, ch) != b.at(y, x, ch);

    const double lam = rng.uniform();
    const auto mx = mixup(a, b, lam);
    range += !in_range(er) + !in_range(co) + !in_range(cm.image) + !in_range(mx);
    endpoints += !(mixup(a, b, 1.0) == a) + !(mixup(a, b, 0.0) == b);

    // 1 - lambda is exact because lambda is in [0.5, 1]; the only rounding is
    // in forming lambda itself, so the identity holds to within DBL_EPSILON.
    const double patch_frac = static_cast<double>(cm.patch.area()) / static_cast<double>(h * w);
    area += std::fabs((1.0 - cm.lambda) - patch_frac) > DBL_EPSILON || cm.lambda < 0.5 || cm.lambda > 1.0;

    // Composed views stay in range for every kind.
    spec.kind = static_cast<AugmentKind>(t % 5);
    const ImageTensor donors[] = {b};
    const auto set = make_views(a, donors, 2, spec, std::min(h, w), rng.fork(4));
    for (const auto& v : set.views) range += !in_range(v);
  }
  const double secs = seconds_since(t0);
  return {partition == 0 && range == 0 && endpoints == 0 && area == 0 && secs < 10.0,
          "500 trials: partition " + std::to_string(partition) + ", range " + std::to_string(range) +
              ", mixup endpoints " + std::to_string(endpoints) + ", cutmix area " + std::to_string(area) +
              " violations, " + fmt("%.2fs", secs)};
}

Outcome criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  const AugmentKind kinds[] = {AugmentKind::None, AugmentKind::RandomErasing, AugmentKind::CutOut,
                               AugmentKind::CutMix, AugmentKind::MixUp};
  std::vector<int> div_wins(5, 0);
  int inv_best = 0;
  std::string table;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    double inv[5], div[5];
    for (int k = 0; k < 5; ++k) {
      ExperimentConfig cfg;
      cfg.seed = seed;
      cfg.aug.kind = kinds[k];
      const auto data = load_dataset(cfg.data, cfg.seed);
      const auto r = pretrain(cfg, data, {false});
      const auto m = run_metrics(cfg, data, r.checkpoint);
      inv[k] = m.l_inv;
      div[k] = m.l_div;
    }
    bool best = true;
    for (int k = 1; k < 5; ++k) {
      div_wins[k] += div[k] > div[0];
      best = best && inv[0] > inv[k];
    }
    inv_best += best;
    table += "    seed " + std::to_string(seed) + ":";
    for (int k = 0; k < 5; ++k)
      table += " " + to_string(kinds[k]) + " " + fmt("%.4f", inv[k]) + "/" + fmt("%.4f", div[k]);
    table += "\n";
  }
  const double secs = seconds_since(t0);
  bool a = true;
  std::string wins;
  for (int k = 1; k < 5; ++k) {
    a = a && div_wins[k] >= 4;
    wins += to_string(kinds[k]) + " " + std::to_string(div_wins[k]) + "/5 ";
  }
  const bool b = inv_best >= 4;
  std::printf("  criterion 7 detail (L_inv/L_div per augmentation):\n%s", table.c_str());
  return {a && b && secs < 600.0,
          "(a) L_div above baseline: " + wins + (a ? "ok" : "FAILED") + "; (b) baseline highest L_inv " +
              std::to_string(inv_best) + "/5 " + (b ? "ok" : "FAILED") + "; " + fmt("%.1fs", secs)};
}

Outcome criterion8() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    double top1[2];
    for (int f = 0; f < 2; ++f) {
      ExperimentConfig cfg;
      cfg.seed = seed;
      cfg.data.label_fraction = f;
      const auto data = load_dataset(cfg.data, cfg.seed);
      const auto r = pretrain(cfg, data, {false});
      top1[f] = run_probe(cfg, data, r.checkpoint).top1;
    }
    wins += top1[1] >= top1[0];
    detail += fmt("%.1f", top1[1]) + " vs " + fmt("%.1f", top1[0]) + "; ";
  }
  return {wins >= 4, "f=1 vs f=0 top-1: " + detail + std::to_string(wins) + "/5 seeds"};
}

std::vector<std::uint8_t> run_and_collect(const ExperimentConfig& cfg, const fs::path& dir, const char* threads) {
  setenv("CLAB_THREADS", threads, 1);
  const auto data = load_dataset(cfg.data, cfg.seed);
  const auto r = pretrain(cfg, data);
  emit_report(r.report, to_string(cfg.aug.kind), data.size() / cfg.train.batch_size, dir, false);
  save_checkpoint(r.checkpoint, dir / "checkpoint.clab");
  // Standalone metrics pass from the saved checkpoint.
  const auto m = run_metrics(cfg, data, load_checkpoint(dir / "checkpoint.clab"));
  write_file_atomic(dir / "metrics_rerun.csv", format_metrics_csv(m));
  unsetenv("CLAB_THREADS");
  std::vector<std::uint8_t> all;
  for (const char* f : {"summary.csv", "loss_curve.csv", "metrics.csv", "metrics_rerun.csv"}) {
    const auto b = read_file_bytes(dir / f);
    all.insert(all.end(), b.begin(), b.end());
  }
  return all;
}

Outcome criterion9() {
  ExperimentConfig cfg;
  cfg.seed = 9;
  cfg.train.epochs = 5;
  cfg.aug.kind = AugmentKind::CutMix;
  cfg.data.label_fraction = 0.5;
  const fs::path base = fs::temp_directory_path() / "clab_acceptance_determinism";
  fs::remove_all(base);
  const auto a = run_and_collect(cfg, base / "a", "1");
  const auto b = run_and_collect(cfg, base / "b", "1");
  const auto c = run_and_collect(cfg, base / "c", "3");
  const bool same_metrics = read_file_bytes(base / "a" / "metrics.csv") == read_file_bytes(base / "a" / "metrics_rerun.csv");
  fs::remove_all(base);
  return {a == b && a == c && same_metrics,
          std::string("rerun ") + (a == b ? "identical" : "DIFFERS") + ", CLAB_THREADS=3 " +
              (a == c ? "identical" : "DIFFERS") + ", metrics from checkpoint " +
              (same_metrics ? "identical" : "DIFFERS") + " (" + std::to_string(a.size()) + " CSV bytes)"};
}

Outcome criterion10() {
  std::vector<std::uint8_t> bytes;
  const std::uint8_t labels[] = {7, 0, 9};
  for (std::size_t r = 0; r < 3; ++r) {
    bytes.push_back(labels[r]);
    for (std::size_t i = 0; i < 3072; ++i) bytes.push_back(static_cast<std::uint8_t>((i * 31 + r * 17) % 256));
  }
  const fs::path dir = fs::temp_directory_path() / "clab_acceptance_cifar";
  fs::create_directories(dir);
  write_file_atomic(dir / "good.bin", bytes);
  bool ok = bytes.size() == 9219;
  std::size_t mismatches = 0;
  const auto ds = load_cifar10(dir / "good.bin");
  ok = ok && ds.size() == 3;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    mismatches += ds.labels[r] != labels[r];
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x) {
          const std::size_t i = c * 1024 + y * 32 + x;
          mismatches += ds.images[r].at(y, x, c) != static_cast<float>((i * 31 + r * 17) % 256) / 255.0f;
        }
  }
  auto rejects = [&](std::vector<std::uint8_t> b) {
    write_file_atomic(dir / "bad.bin", b);
    try {
      load_cifar10(dir / "bad.bin");
    } catch (const std::runtime_error&) {
      return true;
    }
    return false;
  };
  auto truncated = bytes;
  truncated.pop_back();
  auto extra = bytes;
  extra.resize(2 * 3073 + 100);
  const bool rejected = rejects(truncated) && rejects(extra);
  fs::remove_all(dir);
  return {ok && mismatches == 0 && rejected,
          "3 records / 9219 bytes, " + std::to_string(mismatches) + " label/pixel mismatches, truncated input " +
              (rejected ? "rejected" : "ACCEPTED")};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"1 loss oracle equivalence", criterion1},
      {"2 gradient fidelity", criterion2},
      {"3 semi-loss reduction identities", criterion3},
      {"4 filtering monotonicity", criterion4},
      {"5 metric bounds and anchors", criterion5},
      {"6 augmentation invariants", criterion6},
      {"7 augmentation trend (L_div up, L_inv down)", criterion7},
      {"8 supervision trend", criterion8},
      {"9 end-to-end determinism", criterion9},
      {"10 CIFAR-10 binary ingestion", criterion10},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, std::size(criteria));
  return failed ? 1 : 0;
}
