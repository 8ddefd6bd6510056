#include "f2v/archive.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace f2v {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', '2', 'V', 'A', 'R', 'C', 'H', '\0'};
constexpr std::uint8_t kDtypeFloat64 = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("archive truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace

void Archive::add(const std::string& name, const Matrix& data) {
  if (contains(name)) throw CheckpointError("duplicate archive entry: " + name);
  entries_.emplace_back(name, data);
}

bool Archive::contains(const std::string& name) const {
  for (const auto& [n, _] : entries_) {
    if (n == name) return true;
  }
  return false;
}

const Matrix& Archive::get(const std::string& name) const {
  for (const auto& [n, m] : entries_) {
    if (n == name) return m;
  }
  throw CheckpointError("archive has no entry named " + name);
}

std::string Archive::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kArchiveVersion);
  const std::string cfg = config.dump();
  put<std::uint64_t>(out, cfg.size());
  out += cfg;
  put<std::uint64_t>(out, entries_.size());
  for (const auto& [name, m] : entries_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, kDtypeFloat64);
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) put<double>(out, m(i, j));
    }
  }
  put<std::uint32_t>(out, crc_of(out));
  return out;
}

Archive Archive::deserialize(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint archive");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 4);
  if (stored != crc_of(body)) throw CheckpointError("archive checksum mismatch");

  Reader r(body);
  r.take(sizeof(kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kArchiveVersion) throw CheckpointError("unsupported archive version " + std::to_string(version));
  Archive a;
  const auto cfg_len = r.get<std::uint64_t>();
  try {
    a.config = nlohmann::json::parse(r.take(cfg_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("archive config is not valid JSON: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(r.take(name_len));
    if (r.get<std::uint8_t>() != kDtypeFloat64) throw CheckpointError("unsupported dtype in entry " + name);
    const auto ndim = r.get<std::uint32_t>();
    if (ndim > 2) throw CheckpointError("entry " + name + " has rank > 2");
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t d = 0; d < ndim; ++d) dims[d] = r.get<std::uint64_t>();
    if (ndim == 1) std::swap(dims[0], dims[1]);
    Matrix m(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = r.get<double>();
    }
    a.add(name, m);
  }
  if (r.pos() != body.size()) throw CheckpointError("trailing bytes in archive");
  return a;
}

void Archive::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

Archive Archive::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

void store_parameters(Archive& archive, const nn::ParameterSet& params, const std::string& prefix) {
  for (const auto& p : params) archive.add(prefix + p->name, p->value);
}

void load_parameters(const Archive& archive, nn::ParameterSet& params, const std::string& prefix) {
  for (auto& p : params) {
    const Matrix& m = archive.get(prefix + p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw CheckpointError("shape mismatch for " + p->name + ": archive " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", model " + std::to_string(p->value.rows()) + "x" +
                            std::to_string(p->value.cols()));
    }
    p->value = m;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace f2v
