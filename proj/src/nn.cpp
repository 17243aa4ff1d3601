#include "guide/nn.hpp"

#include <cstdio>
#include <cstring>

namespace guide::nn {

namespace {

constexpr char kMagic[4] = {'G', 'N', 'E', 'T'};
constexpr std::uint16_t kVersion = 1;

struct File {
  std::FILE* f = nullptr;
  explicit File(std::FILE* h) : f(h) {}
  ~File() {
    if (f) std::fclose(f);
  }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
};

template <class T>
void write_pod(std::FILE* f, const T& v) {
  if (std::fwrite(&v, sizeof(T), 1, f) != 1) throw IoError("checkpoint write failed");
}

template <class T>
T read_pod(std::FILE* f) {
  T v;
  if (std::fread(&v, sizeof(T), 1, f) != 1) throw FormatError("checkpoint truncated");
  return v;
}

void write_string(std::FILE* f, const std::string& s) {
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(s.size()));
  if (!s.empty() && std::fwrite(s.data(), 1, s.size(), f) != s.size())
    throw IoError("checkpoint write failed");
}

std::string read_string(std::FILE* f) {
  const auto n = read_pod<std::uint32_t>(f);
  if (n > (1u << 20)) throw FormatError("checkpoint string too long");
  std::string s(n, '\0');
  if (n && std::fread(s.data(), 1, n, f) != n) throw FormatError("checkpoint truncated");
  return s;
}

}  // namespace

const Eigen::MatrixXd& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, m] : entries)
    if (n == name) return m;
  throw FormatError("checkpoint entry missing: " + name);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, m] : entries)
    if (n == name) return true;
  return false;
}

void Checkpoint::save(const std::string& path) const {
  File file(std::fopen(path.c_str(), "wb"));
  if (!file.f) throw IoError("cannot open for write: " + path);
  std::FILE* f = file.f;
  if (std::fwrite(kMagic, 1, 4, f) != 4) throw IoError("checkpoint write failed");
  write_pod<std::uint16_t>(f, kVersion);
  write_string(f, kind);
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, m] : entries) {
    write_string(f, name);
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(m.rows()));
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) write_pod<double>(f, m(r, c));
  }
}

Checkpoint Checkpoint::load(const std::string& path) {
  File file(std::fopen(path.c_str(), "rb"));
  if (!file.f) throw IoError("cannot open for read: " + path);
  std::FILE* f = file.f;
  char magic[4];
  if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad GNET magic");
  if (read_pod<std::uint16_t>(f) != kVersion) throw FormatError("unsupported GNET version");
  Checkpoint ck;
  ck.kind = read_string(f);
  const auto count = read_pod<std::uint32_t>(f);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(f);
    const auto rows = read_pod<std::uint32_t>(f);
    const auto cols = read_pod<std::uint32_t>(f);
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = read_pod<double>(f);
    ck.entries.emplace_back(std::move(name), std::move(m));
  }
  return ck;
}

}  // namespace guide::nn
