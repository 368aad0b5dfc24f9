#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "clab/augment.hpp"
#include "clab/checkpoint.hpp"
#include "clab/config.hpp"
#include "clab/contrastive.hpp"
#include "clab/dataset.hpp"
#include "clab/gradcheck.hpp"
#include "clab/harness.hpp"
#include "clab/metrics.hpp"

namespace py = pybind11;
using namespace clab;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using FArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

EmbeddingVector to_vec(const DArray& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d array");
  return EmbeddingVector(std::vector<double>(a.data(), a.data() + a.size()));
}

DArray from_vec(const EmbeddingVector& v) {
  DArray out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.dim())});
  std::copy(v.values.begin(), v.values.end(), out.mutable_data());
  return out;
}

std::vector<EmbeddingVector> to_rows(const DArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  const auto n = static_cast<std::size_t>(a.shape(0)), d = static_cast<std::size_t>(a.shape(1));
  std::vector<EmbeddingVector> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    rows.emplace_back(std::vector<double>(a.data() + i * d, a.data() + (i + 1) * d));
  return rows;
}

ViewEmbeddings to_views(const DArray& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected an (anchors, views, dim) array");
  const auto n = static_cast<std::size_t>(a.shape(0)), v = static_cast<std::size_t>(a.shape(1)),
             d = static_cast<std::size_t>(a.shape(2));
  ViewEmbeddings out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < v; ++j) {
      const double* p = a.data() + (i * v + j) * d;
      out[i].emplace_back(std::vector<double>(p, p + d));
    }
  return out;
}

ImageTensor to_image(const FArray& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected an (H, W, C) array");
  return ImageTensor(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                     static_cast<std::size_t>(a.shape(2)), std::vector<float>(a.data(), a.data() + a.size()));
}

FArray from_image(const ImageTensor& img) {
  FArray out({img.height(), img.width(), img.channels()});
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

py::tuple rect_tuple(const Rect& r) { return py::make_tuple(r.y, r.x, r.h, r.w); }

py::dict loss_dict(const LossBreakdown& b) {
  py::dict d;
  d["loss"] = b.loss;
  d["grad_q"] = from_vec(b.grad_q);
  d["active_negatives"] = b.active_negatives;
  return d;
}

py::tuple dataset_tuple(const Dataset& ds) {
  std::size_t h = 0, w = 0, c = 0;
  if (ds.size() > 0) h = ds.images[0].height(), w = ds.images[0].width(), c = ds.images[0].channels();
  FArray images({ds.size(), h, w, c});
  float* p = images.mutable_data();
  for (const auto& img : ds.images) p = std::copy(img.data().begin(), img.data().end(), p);
  py::array_t<std::int64_t> labels(std::vector<py::ssize_t>{static_cast<py::ssize_t>(ds.size())});
  std::copy(ds.labels.begin(), ds.labels.end(), labels.mutable_data());
  return py::make_tuple(images, labels);
}

AugmentSpec make_spec(const std::string& kind) {
  AugmentSpec spec;
  spec.kind = parse_augment_kind(kind);
  return spec;
}

ExperimentConfig config_from(const std::string& text, std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg;
  cfg.apply(parse_key_values(text));
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

py::dict metrics_dict(const MetricReport& m) {
  py::dict d;
  d["l_inv"] = m.l_inv;
  d["l_div"] = m.l_div;
  d["anchors"] = m.anchors;
  d["views"] = m.views;
  d["sigma"] = m.sigma;
  return d;
}

}  // namespace

PYBIND11_MODULE(_clab, m) {
  m.doc() = "Contrastive pretraining core bindings";

  m.def("dot", [](const DArray& a, const DArray& b) { return dot(to_vec(a), to_vec(b)); });
  m.def("l2_normalize", [](const DArray& v) { return from_vec(l2_normalize(to_vec(v))); });

  py::class_<NegativeQueue>(m, "NegativeQueue")
      .def(py::init<std::size_t, std::size_t>(), py::arg("capacity"), py::arg("dim"))
      .def_static("random", [](std::size_t capacity, std::size_t dim, std::uint64_t seed) {
        return NegativeQueue::random(capacity, dim, RngStream(seed));
      }, py::arg("capacity"), py::arg("dim"), py::arg("seed"))
      .def("push", [](NegativeQueue& q, const DArray& keys, const std::vector<Label>& labels) {
        q.push(EmbeddingBatch(to_rows(keys)), labels);
      }, py::arg("keys"), py::arg("labels"))
      .def_property_readonly("capacity", &NegativeQueue::capacity)
      .def_property_readonly("dim", &NegativeQueue::dim)
      .def_property_readonly("filled", &NegativeQueue::filled)
      .def_property_readonly("cursor", &NegativeQueue::cursor)
      .def("label", &NegativeQueue::label)
      .def("key", [](const NegativeQueue& q, std::size_t slot) { return from_vec(q.key_vector(slot)); });
  m.attr("UNLABELED") = kUnlabeled;

  m.def("filter_negatives", &filter_negatives, py::arg("queue"), py::arg("anchor_label"));
  m.def("loss_self", [](const DArray& q, const DArray& k, const NegativeQueue& queue, double tau) {
    return loss_dict(loss_self(to_vec(q), to_vec(k), queue, tau));
  }, py::arg("q"), py::arg("k_pos"), py::arg("queue"), py::arg("tau") = 0.2);
  m.def("loss_full", [](const DArray& q, const DArray& k, const NegativeQueue& queue, Label label, double tau) {
    return loss_dict(loss_full(to_vec(q), to_vec(k), queue, label, tau));
  }, py::arg("q"), py::arg("k_pos"), py::arg("queue"), py::arg("label"), py::arg("tau") = 0.2);
  m.def("loss_semi", [](const DArray& q, const DArray& k, const std::vector<std::optional<Label>>& labels,
                        const NegativeQueue& queue_d, const NegativeQueue& queue_u, double tau) {
    auto qs = to_rows(q), ks = to_rows(k);
    if (qs.size() != ks.size() || qs.size() != labels.size())
      throw std::invalid_argument("q, k_pos and labels must have the same length");
    std::vector<SemiSample> batch;
    for (std::size_t i = 0; i < qs.size(); ++i) batch.push_back({qs[i], ks[i], LabelMask{labels[i]}});
    return loss_semi(batch, queue_d, queue_u, tau).total;
  }, py::arg("q"), py::arg("k_pos"), py::arg("labels"), py::arg("queue_d"), py::arg("queue_u"),
     py::arg("tau") = 0.2);

  m.def("invariance", [](const DArray& anchors, const DArray& views) {
    return invariance(EmbeddingBatch(to_rows(anchors)), to_views(views));
  }, py::arg("anchors"), py::arg("views"));
  m.def("diversity", [](const DArray& views, double sigma) { return diversity(to_views(views), sigma); },
        py::arg("views"), py::arg("sigma") = 1.0);

  m.def("base_view", [](const FArray& img, std::size_t out_size, std::uint64_t seed) {
    return from_image(base_view(to_image(img), out_size, RngStream(seed)));
  }, py::arg("image"), py::arg("out_size"), py::arg("seed"));
  m.def("random_erasing", [](const FArray& img, std::uint64_t seed, double p) {
    AugmentSpec spec = make_spec("erasing");
    spec.erase_prob = p;
    auto [out, rect] = random_erasing(to_image(img), spec, RngStream(seed));
    return py::make_tuple(from_image(out), rect_tuple(rect));
  }, py::arg("image"), py::arg("seed"), py::arg("p") = 0.5);
  m.def("cutout", [](const FArray& img, std::uint64_t seed, double size, bool mean_fill) {
    AugmentSpec spec = make_spec("cutout");
    spec.cutout_size = size;
    spec.cutout_fill = mean_fill ? CutoutFill::Mean : CutoutFill::Zero;
    auto [out, rect] = cutout(to_image(img), spec, RngStream(seed));
    return py::make_tuple(from_image(out), rect_tuple(rect));
  }, py::arg("image"), py::arg("seed"), py::arg("size") = 0.5, py::arg("mean_fill") = false);
  m.def("cutmix", [](const FArray& anchor, const FArray& donor, std::uint64_t seed, double alpha) {
    const auto r = cutmix(to_image(anchor), to_image(donor), RngStream(seed), alpha);
    return py::make_tuple(from_image(r.image), r.lambda, rect_tuple(r.patch));
  }, py::arg("anchor"), py::arg("donor"), py::arg("seed"), py::arg("alpha") = 1.0);
  m.def("mixup", [](const FArray& anchor, const FArray& donor, double lambda) {
    return from_image(mixup(to_image(anchor), to_image(donor), lambda));
  }, py::arg("anchor"), py::arg("donor"), py::arg("lam"));
  m.def("make_views", [](const FArray& anchor, const std::vector<FArray>& donors, std::size_t num_views,
                         const std::string& kind, std::size_t out_size, std::uint64_t seed) {
    std::vector<ImageTensor> d;
    for (const auto& a : donors) d.push_back(to_image(a));
    const auto vs = make_views(to_image(anchor), d, num_views, make_spec(kind), out_size, RngStream(seed));
    py::list views;
    for (const auto& v : vs.views) views.append(from_image(v));
    return py::make_tuple(views, vs.lambdas);
  }, py::arg("anchor"), py::arg("donors"), py::arg("num_views"), py::arg("kind"), py::arg("out_size"),
     py::arg("seed"));

  m.def("parse_cifar10", [](const py::bytes& b) {
    const std::string s = b;
    return dataset_tuple(parse_cifar10(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())));
  });
  m.def("load_cifar10", [](const std::string& path) { return dataset_tuple(load_cifar10(path)); });
  m.def("synth_dataset", [](std::size_t classes, std::size_t per_class, std::size_t image_size,
                            std::size_t channels, double noise, std::uint64_t seed) {
    DatasetSpec spec;
    spec.classes = classes;
    spec.per_class = per_class;
    spec.image_size = image_size;
    spec.channels = channels;
    spec.noise = noise;
    return dataset_tuple(synth_dataset(spec, seed));
  }, py::arg("classes") = 8, py::arg("per_class") = 128, py::arg("image_size") = 16, py::arg("channels") = 1,
     py::arg("noise") = 0.1, py::arg("seed") = 0);

  m.def("run_gradcheck", [](std::size_t trials, std::uint64_t seed) {
    py::dict out;
    for (const auto& r : run_gradcheck(trials, seed)) out[py::str(r.check)] = r.max_rel_error;
    return out;
  }, py::arg("trials") = 100, py::arg("seed") = 1);

  m.def("default_config", [] { return ExperimentConfig{}.to_text(); });
  m.def("pretrain", [](const std::string& config, std::optional<std::uint64_t> seed, bool evaluate) {
    const auto cfg = config_from(config, seed);
    const auto data = load_dataset(cfg.data, cfg.seed);
    PretrainResult r;
    {
      py::gil_scoped_release release;
      r = pretrain(cfg, data, {evaluate});
    }
    const auto bytes = serialize_checkpoint(r.checkpoint);
    py::dict d;
    d["batch_losses"] = r.report.batch_losses;
    d["epoch_losses"] = r.report.epoch_losses;
    d["checkpoint"] = py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    if (evaluate) {
      d["metrics"] = metrics_dict(r.report.metrics);
      d["top1"] = r.report.probe.top1;
      d["top5"] = r.report.probe.top5;
    }
    return d;
  }, py::arg("config") = "", py::arg("seed") = std::nullopt, py::arg("evaluate") = true);
  m.def("metrics", [](const std::string& config, const py::bytes& checkpoint, std::optional<std::uint64_t> seed) {
    const auto cfg = config_from(config, seed);
    const std::string s = checkpoint;
    const auto ckpt = deserialize_checkpoint(std::vector<std::uint8_t>(s.begin(), s.end()));
    return metrics_dict(run_metrics(cfg, load_dataset(cfg.data, cfg.seed), ckpt));
  }, py::arg("config"), py::arg("checkpoint"), py::arg("seed") = std::nullopt);
}
