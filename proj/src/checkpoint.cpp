#include "clab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace clab {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }

  void layers(const std::vector<DenseLayer>& ls) {
    for (const auto& l : ls) {
      u32(static_cast<std::uint32_t>(l.weight.rows()));
      u32(static_cast<std::uint32_t>(l.weight.cols()));
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) f64(l.weight(r, c));
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) f64(l.bias[r]);
    }
  }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw std::runtime_error("checkpoint: truncated at byte " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

  std::vector<DenseLayer> layers(std::uint32_t count) {
    std::vector<DenseLayer> out;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint32_t rows = u32();
      const std::uint32_t cols = u32();
      need((static_cast<std::size_t>(rows) * cols + rows) * 8);
      DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
      for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c) l.weight(r, c) = f64();
      for (std::uint32_t r = 0; r < rows; ++r) l.bias[r] = f64();
      out.push_back(std::move(l));
    }
    return out;
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

bool Checkpoint::operator==(const Checkpoint& other) const {
  if (!(query == other.query) || !(key == other.key) || step != other.step) return false;
  if (velocity.layers.size() != other.velocity.layers.size()) return false;
  for (std::size_t i = 0; i < velocity.layers.size(); ++i)
    if (velocity.layers[i].weight != other.velocity.layers[i].weight ||
        velocity.layers[i].bias != other.velocity.layers[i].bias)
      return false;
  return true;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.key.same_shape(ckpt.query) || !ckpt.velocity.congruent_with(ckpt.query))
    throw std::invalid_argument("checkpoint: query, key and velocity shapes disagree");
  Writer w;
  w.raw(kCheckpointMagic, 5);
  w.u32(static_cast<std::uint32_t>(ckpt.query.layers.size()));
  w.layers(ckpt.query.layers);
  w.layers(ckpt.key.layers);
  w.layers(ckpt.velocity.layers);
  w.u64(ckpt.step);
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kCheckpointMagic, 5) != 0)
    throw std::runtime_error("checkpoint: missing CLAB1 magic");
  Reader r(bytes);
  r.skip(5);
  const std::uint32_t count = r.u32();
  Checkpoint c;
  c.query.layers = r.layers(count);
  c.key.layers = r.layers(count);
  c.velocity.layers = r.layers(count);
  c.step = r.u64();
  if (!r.at_end())
    throw std::runtime_error("checkpoint: " + std::to_string(bytes.size() - r.pos()) +
                             " trailing bytes");
  c.query.validate();
  c.key.validate();
  if (!c.key.same_shape(c.query) || !c.velocity.congruent_with(c.query))
    throw std::runtime_error("checkpoint: query, key and velocity shapes disagree");
  return c;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

}  // namespace clab
