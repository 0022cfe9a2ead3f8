#include "ctxmotion/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ctxmotion/errors.hpp"

namespace ctxmotion {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'X', 'M', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void text(const std::string& s) {
    u64(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw VersionError("checkpoint is truncated");
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
  std::string text() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool magic() {
    need(sizeof(kMagic));
    const bool ok = std::memcmp(bytes_.data() + pos_, kMagic, sizeof(kMagic)) == 0;
    pos_ += sizeof(kMagic);
    return ok;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const MotionModel& model) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  w.text(model.config().to_json());
  w.u64(model.parameters().size());
  for (const auto& [name, t] : model.parameters()) {
    w.text(name);
    w.u64(t.rank());
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  return w.take();
}

MotionModel deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (!r.magic()) throw VersionError("not a checkpoint file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionError("unsupported checkpoint format version " + std::to_string(version) +
                       " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const ModelConfig config = ModelConfig::from_json(r.text());
  const std::uint64_t blocks = r.u64();
  ParameterStore store;
  for (std::uint64_t b = 0; b < blocks; ++b) {
    const std::string name = r.text();
    const std::uint64_t rank = r.u64();
    if (rank > 8) throw VersionError("checkpoint block '" + name + "' has implausible rank");
    ad::Shape shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(r.u64());
    r.need(ad::numel(shape) * 8);
    ad::Tensor& t = store.add(name, shape);
    for (double& v : t.mutable_data()) v = r.f64();
  }
  if (!r.done()) throw VersionError("trailing bytes after checkpoint blocks");
  return MotionModel(config, std::move(store));
}

void save_checkpoint(const std::string& path, const MotionModel& model) {
  const auto bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

MotionModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot open checkpoint '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace ctxmotion
