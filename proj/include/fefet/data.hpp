#pragma once

// MNIST IDX container: big-endian header (magic, counts, dimensions) followed
// by raw unsigned bytes. Files may be gzip-compressed; zlib reads plain files
// unchanged.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fefet/errors.hpp"
#include "fefet/random.hpp"

namespace fefet {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct Dataset {
  std::size_t rows = 28;
  std::size_t cols = 28;
  std::vector<std::uint8_t> images;  // size() * rows * cols, row-major per image
  std::vector<std::uint8_t> labels;
  std::string split = "all";

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t pixels() const noexcept { return rows * cols; }

  std::span<const std::uint8_t> image(std::size_t i) const {
    return std::span<const std::uint8_t>(images).subspan(i * pixels(), pixels());
  }

  std::array<std::size_t, 10> class_counts() const {
    std::array<std::size_t, 10> c{};
    for (auto l : labels) ++c[l % 10];
    return c;
  }
};

namespace detail {

class GzFile {
 public:
  GzFile(const std::string& path, const char* mode) : path_(path), f_(gzopen(path.c_str(), mode)) {
    if (!f_) throw DataError(DataError::Kind::Io, "cannot open " + path);
  }
  ~GzFile() {
    if (f_) gzclose(f_);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;

  // Reads up to n bytes; returns the count actually read.
  std::size_t read(void* buf, std::size_t n) {
    std::size_t total = 0;
    auto* p = static_cast<unsigned char*>(buf);
    while (total < n) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n - total, 1u << 30));
      const int got = gzread(f_, p + total, chunk);
      if (got < 0) throw DataError(DataError::Kind::Io, "read error in " + path_);
      if (got == 0) break;
      total += static_cast<std::size_t>(got);
    }
    return total;
  }

  void write(const void* buf, std::size_t n) {
    if (n > 0 && gzwrite(f_, buf, static_cast<unsigned>(n)) != static_cast<int>(n))
      throw DataError(DataError::Kind::Io, "write error in " + path_);
  }

  void close() {
    if (f_ && gzclose(f_) != Z_OK) {
      f_ = nullptr;
      throw DataError(DataError::Kind::Io, "close error in " + path_);
    }
    f_ = nullptr;
  }

 private:
  std::string path_;
  gzFile f_;
};

inline std::uint32_t be32(const unsigned char* b) {
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

inline void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct IdxBody {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
};

inline IdxBody read_idx(const std::string& path, std::uint32_t magic, std::size_t ndims, const char* what) {
  GzFile f(path, "rb");
  unsigned char header[4 * 4];
  const std::size_t header_len = 4 * (1 + ndims);
  if (f.read(header, header_len) != header_len)
    throw DataError(DataError::Kind::Truncated, std::string(what) + " file " + path + " is truncated: header needs " +
                                                    std::to_string(header_len) + " bytes");
  const std::uint32_t got = be32(header);
  if (got != magic) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "bad magic 0x%08x (expected 0x%08x)", got, magic);
    throw DataError(DataError::Kind::BadMagic, std::string(what) + " file " + path + ": " + buf);
  }
  IdxBody body;
  std::size_t expected = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    body.dims.push_back(be32(header + 4 * (d + 1)));
    expected *= body.dims.back();
  }
  body.bytes.resize(expected);
  const std::size_t n = f.read(body.bytes.data(), expected);
  if (n != expected)
    throw DataError(DataError::Kind::Truncated, std::string(what) + " file " + path + " is truncated: expected " +
                                                    std::to_string(header_len + expected) + " bytes, got " +
                                                    std::to_string(header_len + n));
  unsigned char extra;
  if (f.read(&extra, 1) != 0)
    throw DataError(DataError::Kind::Format, std::string(what) + " file " + path + " has trailing bytes");
  return body;
}

}  // namespace detail

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  auto img = detail::read_idx(images_path, kIdxImagesMagic, 3, "images");
  auto lbl = detail::read_idx(labels_path, kIdxLabelsMagic, 1, "labels");
  if (img.dims[0] != lbl.dims[0])
    throw DataError(DataError::Kind::CountMismatch, "image count " + std::to_string(img.dims[0]) +
                                                        " does not match label count " + std::to_string(lbl.dims[0]));
  for (auto l : lbl.bytes)
    if (l > 9) throw DataError(DataError::Kind::Format, "label out of range 0-9 in " + labels_path);
  Dataset ds;
  ds.rows = img.dims[1];
  ds.cols = img.dims[2];
  ds.images = std::move(img.bytes);
  ds.labels = std::move(lbl.bytes);
  return ds;
}

// Writes a dataset back in IDX form; gzip when the path ends in ".gz".
inline void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
  auto write_one = [](const std::string& path, const std::vector<unsigned char>& header,
                      const std::vector<std::uint8_t>& body) {
    detail::GzFile f(path, detail::ends_with(path, ".gz") ? "wb9" : "wbT");
    f.write(header.data(), header.size());
    f.write(body.data(), body.size());
    f.close();
  };
  std::vector<unsigned char> h;
  detail::put_be32(h, kIdxImagesMagic);
  detail::put_be32(h, static_cast<std::uint32_t>(ds.size()));
  detail::put_be32(h, static_cast<std::uint32_t>(ds.rows));
  detail::put_be32(h, static_cast<std::uint32_t>(ds.cols));
  write_one(images_path, h, ds.images);
  h.clear();
  detail::put_be32(h, kIdxLabelsMagic);
  detail::put_be32(h, static_cast<std::uint32_t>(ds.size()));
  write_one(labels_path, h, ds.labels);
}

inline Dataset subset(const Dataset& ds, std::span<const std::size_t> indices, std::string split) {
  Dataset out;
  out.rows = ds.rows;
  out.cols = ds.cols;
  out.split = std::move(split);
  out.images.reserve(indices.size() * ds.pixels());
  for (auto i : indices) {
    const auto img = ds.image(i);
    out.images.insert(out.images.end(), img.begin(), img.end());
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

// Seeded shuffle (mt19937_64 seeded with `seed`, Fisher-Yates from the last
// index down with rejection-sampled indices), then a prefix split.
inline std::pair<Dataset, Dataset> take_split(const Dataset& ds, std::size_t n_train, std::size_t n_test,
                                              std::uint64_t seed) {
  if (n_train + n_test > ds.size())
    throw DataError(DataError::Kind::Insufficient,
                    "take_split: requested " + std::to_string(n_train) + " train + " + std::to_string(n_test) +
                        " test patterns but the dataset holds " + std::to_string(ds.size()));
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::span<const std::size_t> all(order);
  return {subset(ds, all.first(n_train), "train"), subset(ds, all.subspan(n_train, n_test), "test")};
}

}  // namespace fefet
