#include "flowvc/pipeline/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "flowvc/errors.hpp"

namespace flowvc::pipeline {

namespace {

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, const std::string& s, bool wide) {
  if (wide) {
    put<std::uint64_t>(out, s.size());
  } else {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  }
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (n > bytes_.size() - pos_) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const TensorRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

std::string Checkpoint::serialize() const {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, version);
  put_string(out, config_text, true);
  put<std::uint64_t>(out, step);
  put<std::uint64_t>(out, records.size());
  for (const auto& r : records) {
    if (num::shape_numel(r.shape) != r.values.size()) {
      throw CheckpointError("record '" + r.name + "' has " + std::to_string(r.values.size()) + " values for shape " +
                            num::shape_str(r.shape));
    }
    put_string(out, r.name, false);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (const auto d : r.shape) put<std::uint64_t>(out, d);
    for (const double v : r.values) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  Reader in(bytes);
  if (in.get_string(sizeof kCheckpointMagic, "magic") != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  Checkpoint c;
  c.version = in.get<std::uint32_t>("version");
  if (c.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(c.version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  c.config_text = in.get_string(in.get<std::uint64_t>("config length"), "config text");
  c.step = in.get<std::uint64_t>("step");
  const auto count = in.get<std::uint64_t>("record count");
  for (std::uint64_t i = 0; i < count; ++i) {
    TensorRecord r;
    r.name = in.get_string(in.get<std::uint32_t>("name length"), "record name");
    const auto ndim = in.get<std::uint32_t>("rank");
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const auto dim = in.get<std::uint64_t>("shape");
      r.shape.push_back(static_cast<std::size_t>(dim));
      numel *= dim;
      if (numel > bytes.size()) throw CheckpointError("record '" + r.name + "' is larger than the file");
    }
    r.values.resize(numel);
    for (auto& v : r.values) v = std::bit_cast<double>(in.get<std::uint64_t>("values"));
    c.records.push_back(std::move(r));
  }
  if (!in.done()) throw CheckpointError("trailing bytes after the last checkpoint record");
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace flowvc::pipeline
