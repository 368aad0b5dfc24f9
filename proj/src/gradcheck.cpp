#include "clab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace clab {

namespace {

double functional(const EncoderParams& p, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& probe) {
  return forward_record(p, inputs).output.cwiseProduct(probe).sum();
}

}  // namespace

double encoder_grad_check(const EncoderParams& params, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& probe, double h) {
  const ActivationRecord rec = forward_record(params, inputs);
  const GradBuffer g = backward(params, rec, probe);
  EncoderParams p = params;
  double worst = 0.0;
  auto check = [&](double& slot, double analytic) {
    const double orig = slot;
    slot = orig + h;
    const double up = functional(p, inputs, probe);
    slot = orig - h;
    const double down = functional(p, inputs, probe);
    slot = orig;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2.0 * h)));
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) check(layer.weight(r, c), g.layers[l].weight(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) check(layer.bias[r], g.layers[l].bias[r]);
  }
  return worst;
}

EmbeddingVector random_unit(std::size_t dim, RngStream& rng) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return l2_normalize(EmbeddingVector(std::move(v)));
}

std::vector<GradcheckRow> run_gradcheck(std::size_t trials, std::uint64_t seed) {
  const RngStream root(seed);
  GradcheckRow self{"loss_self", trials, 0.0};
  GradcheckRow full{"loss_full", trials, 0.0};
  GradcheckRow semi{"loss_semi", trials, 0.0};
  GradcheckRow enc{"encoder_backward", trials, 0.0};

  for (std::size_t t = 0; t < trials; ++t) {
    RngStream rng = root.fork(t);
    const std::size_t dim = 2 + rng.uniform_index(15);
    const std::size_t cap = 1 + rng.uniform_index(32);
    const double tau = rng.uniform(0.1, 1.0);
    NegativeQueue queue(cap, dim);
    std::vector<EmbeddingVector> keys;
    std::vector<Label> labels;
    for (std::size_t m = 0; m < cap; ++m) {
      keys.push_back(random_unit(dim, rng));
      labels.push_back(rng.bernoulli(0.2) ? kUnlabeled : static_cast<Label>(rng.uniform_index(4)));
    }
    queue.push(EmbeddingBatch(keys), labels);
    const Label anchor = static_cast<Label>(rng.uniform_index(4));

    LossInstance inst;
    inst.q = random_unit(dim, rng);
    inst.k_pos = random_unit(dim, rng);
    inst.queue = &queue;
    inst.tau = tau;

    inst.kind = LossKind::Self;
    self.max_rel_error = std::max(self.max_rel_error, loss_grad_check(inst));
    inst.kind = LossKind::Full;
    inst.label = anchor;
    full.max_rel_error = std::max(full.max_rel_error, loss_grad_check(inst));
    inst.kind = LossKind::Semi;
    inst.queue_u = &queue;
    if (rng.bernoulli(0.5)) inst.label.reset();
    semi.max_rel_error = std::max(semi.max_rel_error, loss_grad_check(inst));

    // Small encoder: <= 200 parameters.
    const std::size_t in = 2 + rng.uniform_index(4);
    const std::size_t hidden = 2 + rng.uniform_index(6);
    const std::size_t out = 2 + rng.uniform_index(4);
    const std::size_t sizes[] = {in, hidden, out};
    EncoderParams params = EncoderParams::init(sizes, rng.fork(1));
    for (auto& l : params.layers)
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = rng.uniform(-0.5, 0.5);
    const Eigen::Index batch = 1 + static_cast<Eigen::Index>(rng.uniform_index(3));
    Eigen::MatrixXd x(static_cast<Eigen::Index>(in), batch);
    Eigen::MatrixXd probe(static_cast<Eigen::Index>(out), batch);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = rng.uniform(-1.0, 1.0);
    enc.max_rel_error = std::max(enc.max_rel_error, encoder_grad_check(params, x, probe));
  }
  return {self, full, semi, enc};
}

}  // namespace clab
