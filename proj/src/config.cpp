#include "clab/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace clab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty())
    throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  return d;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw std::invalid_argument("config: " + key + " expects a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: " + key + " expects true/false, got '" + v + "'");
}

std::string fmt_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_u64(key, trim(item)));
  if (out.empty()) throw std::invalid_argument("config: " + key + " expects a comma-separated list");
  return out;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void ExperimentConfig::apply(const KeyValues& kv) {
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"seed", [&](auto& k, auto& v) { seed = to_u64(k, v); }},
      {"out", [&](auto&, auto& v) { out_dir = v; }},
      {"plots", [&](auto& k, auto& v) { plots = to_bool(k, v); }},
      {"data.source",
       [&](auto& k, auto& v) {
         if (v == "synthetic") data.source = DataSource::Synthetic;
         else if (v == "cifar10-binary" || v == "cifar10") data.source = DataSource::Cifar10Binary;
         else throw std::invalid_argument("config: " + k + " must be synthetic or cifar10-binary");
       }},
      {"data.path", [&](auto&, auto& v) { data.path = v; }},
      {"data.limit", [&](auto& k, auto& v) { data.limit = to_u64(k, v); }},
      {"data.classes", [&](auto& k, auto& v) { data.classes = to_u64(k, v); }},
      {"data.per_class", [&](auto& k, auto& v) { data.per_class = to_u64(k, v); }},
      {"data.image_size", [&](auto& k, auto& v) { data.image_size = to_u64(k, v); }},
      {"data.channels", [&](auto& k, auto& v) { data.channels = to_u64(k, v); }},
      {"data.noise", [&](auto& k, auto& v) { data.noise = to_double(k, v); }},
      {"data.label_fraction", [&](auto& k, auto& v) { data.label_fraction = to_double(k, v); }},
      {"aug.kind", [&](auto&, auto& v) { aug.kind = parse_augment_kind(v); }},
      {"aug.erase_prob", [&](auto& k, auto& v) { aug.erase_prob = to_double(k, v); }},
      {"aug.area_low", [&](auto& k, auto& v) { aug.area_low = to_double(k, v); }},
      {"aug.area_high", [&](auto& k, auto& v) { aug.area_high = to_double(k, v); }},
      {"aug.aspect_low", [&](auto& k, auto& v) { aug.aspect_low = to_double(k, v); }},
      {"aug.aspect_high", [&](auto& k, auto& v) { aug.aspect_high = to_double(k, v); }},
      {"aug.cutout_size", [&](auto& k, auto& v) { aug.cutout_size = to_double(k, v); }},
      {"aug.cutout_fill",
       [&](auto& k, auto& v) {
         if (v == "zero") aug.cutout_fill = CutoutFill::Zero;
         else if (v == "mean") aug.cutout_fill = CutoutFill::Mean;
         else throw std::invalid_argument("config: " + k + " must be zero or mean");
       }},
      {"aug.alpha", [&](auto& k, auto& v) { aug.mixup_alpha = to_double(k, v); }},
      {"train.lr", [&](auto& k, auto& v) { train.lr = to_double(k, v); }},
      {"train.weight_decay", [&](auto& k, auto& v) { train.weight_decay = to_double(k, v); }},
      {"train.momentum", [&](auto& k, auto& v) { train.momentum = to_double(k, v); }},
      {"train.batch_size", [&](auto& k, auto& v) { train.batch_size = to_u64(k, v); }},
      {"train.epochs", [&](auto& k, auto& v) { train.epochs = to_u64(k, v); }},
      {"train.key_momentum", [&](auto& k, auto& v) { train.key_momentum = to_double(k, v); }},
      {"train.temperature", [&](auto& k, auto& v) { train.temperature = to_double(k, v); }},
      {"train.queue_size", [&](auto& k, auto& v) { train.queue_size = to_u64(k, v); }},
      {"train.views", [&](auto& k, auto& v) { train.views = to_u64(k, v); }},
      {"model.hidden", [&](auto& k, auto& v) { hidden = to_size_list(k, v); }},
      {"model.embed_dim", [&](auto& k, auto& v) { embed_dim = to_u64(k, v); }},
      {"model.view_size", [&](auto& k, auto& v) { view_size = to_u64(k, v); }},
      {"metrics.sigma", [&](auto& k, auto& v) { metrics.sigma = to_double(k, v); }},
      {"metrics.views", [&](auto& k, auto& v) { metrics.views = to_u64(k, v); }},
      {"metrics.anchors", [&](auto& k, auto& v) { metrics.anchors = to_u64(k, v); }},
      {"metrics.normalized", [&](auto& k, auto& v) { metrics.normalized = to_bool(k, v); }},
      {"metrics.encoder",
       [&](auto& k, auto& v) {
         if (v == "query") metrics.encoder = AnchorEncoder::Query;
         else if (v == "key") metrics.encoder = AnchorEncoder::Key;
         else throw std::invalid_argument("config: " + k + " must be query or key");
       }},
      {"probe.max_iters", [&](auto& k, auto& v) { probe_max_iters = to_u64(k, v); }},
  };
  for (const auto& [key, value] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second(key, value);
  }
}

void ExperimentConfig::validate() const {
  data.validate();
  aug.validate();
  train.validate();
  metrics.validate();
  if (hidden.empty() || hidden.size() > 2)
    throw std::invalid_argument("config: model.hidden takes one or two widths");
  if (embed_dim == 0) throw std::invalid_argument("config: model.embed_dim must be positive");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  o << "seed=" << seed << "\n";
  o << "data.source=" << (data.source == DataSource::Synthetic ? "synthetic" : "cifar10-binary") << "\n";
  if (data.source == DataSource::Cifar10Binary) {
    o << "data.path=" << data.path.string() << "\n";
    o << "data.limit=" << data.limit << "\n";
  } else {
    o << "data.classes=" << data.classes << "\n";
    o << "data.per_class=" << data.per_class << "\n";
    o << "data.image_size=" << data.image_size << "\n";
    o << "data.channels=" << data.channels << "\n";
    o << "data.noise=" << fmt_double(data.noise) << "\n";
  }
  o << "data.label_fraction=" << fmt_double(data.label_fraction) << "\n";
  o << "aug.kind=" << to_string(aug.kind) << "\n";
  o << "aug.erase_prob=" << fmt_double(aug.erase_prob) << "\n";
  o << "aug.area_low=" << fmt_double(aug.area_low) << "\n";
  o << "aug.area_high=" << fmt_double(aug.area_high) << "\n";
  o << "aug.aspect_low=" << fmt_double(aug.aspect_low) << "\n";
  o << "aug.aspect_high=" << fmt_double(aug.aspect_high) << "\n";
  o << "aug.cutout_size=" << fmt_double(aug.cutout_size) << "\n";
  o << "aug.cutout_fill=" << (aug.cutout_fill == CutoutFill::Zero ? "zero" : "mean") << "\n";
  o << "aug.alpha=" << fmt_double(aug.mixup_alpha) << "\n";
  o << "train.lr=" << fmt_double(train.lr) << "\n";
  o << "train.weight_decay=" << fmt_double(train.weight_decay) << "\n";
  o << "train.momentum=" << fmt_double(train.momentum) << "\n";
  o << "train.batch_size=" << train.batch_size << "\n";
  o << "train.epochs=" << train.epochs << "\n";
  o << "train.key_momentum=" << fmt_double(train.key_momentum) << "\n";
  o << "train.temperature=" << fmt_double(train.temperature) << "\n";
  o << "train.queue_size=" << train.queue_size << "\n";
  o << "train.views=" << train.views << "\n";
  o << "model.hidden=";
  for (std::size_t i = 0; i < hidden.size(); ++i) o << (i ? "," : "") << hidden[i];
  o << "\n";
  o << "model.embed_dim=" << embed_dim << "\n";
  o << "model.view_size=" << view_size << "\n";
  o << "metrics.sigma=" << fmt_double(metrics.sigma) << "\n";
  o << "metrics.views=" << metrics.views << "\n";
  o << "metrics.anchors=" << metrics.anchors << "\n";
  o << "metrics.normalized=" << (metrics.normalized ? "true" : "false") << "\n";
  o << "metrics.encoder=" << (metrics.encoder == AnchorEncoder::Query ? "query" : "key") << "\n";
  o << "probe.max_iters=" << probe_max_iters << "\n";
  return o.str();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg;
  try {
    cfg.apply(parse_key_values(ss.str()));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return cfg;
}

}  // namespace clab
