#include "pnp/binary_io.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include "pnp/errors.hpp"

namespace pnp {

void BinaryWriter::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::kIo, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    require(static_cast<bool>(out), ErrorKind::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

BinaryReader BinaryReader::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kMissingArtifact, "cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return BinaryReader(std::move(data));
}

void BinaryReader::expect_bytes(std::string_view s) {
  require(pos_ + s.size() <= buf_.size(), ErrorKind::kIo, "truncated file");
  require(std::equal(s.begin(), s.end(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_)), ErrorKind::kIo,
          "bad magic, expected '" + std::string(s) + "'");
  pos_ += s.size();
}

void BinaryReader::skip(std::size_t n) {
  require(pos_ + n <= buf_.size(), ErrorKind::kIo, "truncated file");
  pos_ += n;
}

std::uint64_t BinaryReader::get(int n) {
  require(pos_ + static_cast<std::size_t>(n) <= buf_.size(), ErrorKind::kIo, "truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
  pos_ += static_cast<std::size_t>(n);
  return v;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace pnp
