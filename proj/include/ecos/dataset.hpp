#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ecos/error.hpp"

namespace ecos {

enum class DistanceKind { SquaredL2 };

/// N feature rows of a fixed dimension, stored row-major as f32, with optional
/// per-row class labels and domain tags.
class FeatureDataset {
 public:
  FeatureDataset() = default;

  FeatureDataset(std::size_t n, std::size_t dim, std::vector<float> data,
                 std::optional<std::vector<std::int32_t>> labels = std::nullopt,
                 std::optional<std::vector<std::int32_t>> domains = std::nullopt)
      : n_(n), dim_(dim), data_(std::move(data)), labels_(std::move(labels)),
        domains_(std::move(domains)) {
    require(data_.size() == n_ * dim_, "data size does not match n*dim");
    require(!labels_ || labels_->size() == n_, "labels length does not match n");
    require(!domains_ || domains_->size() == n_, "domains length does not match n");
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < dim_; ++j) {
        if (!std::isfinite(data_[i * dim_ + j])) {
          throw InvalidArgument("non-finite at row " + std::to_string(i));
        }
      }
    }
  }

  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return n_ == 0; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  const std::vector<float>& data() const { return data_; }

  bool has_labels() const { return labels_.has_value(); }
  bool has_domains() const { return domains_.has_value(); }
  const std::vector<std::int32_t>& labels() const {
    require(labels_.has_value(), "dataset has no labels");
    return *labels_;
  }
  const std::vector<std::int32_t>& domains() const {
    require(domains_.has_value(), "dataset has no domain tags");
    return *domains_;
  }

  /// Rows at the given indices, in that order, carrying labels/domains along.
  FeatureDataset subset(std::span<const std::size_t> indices) const {
    std::vector<float> out;
    out.reserve(indices.size() * dim_);
    std::optional<std::vector<std::int32_t>> lab, dom;
    if (labels_) lab.emplace();
    if (domains_) dom.emplace();
    for (std::size_t idx : indices) {
      require(idx < n_, "subset index out of range");
      auto r = row(idx);
      out.insert(out.end(), r.begin(), r.end());
      if (lab) lab->push_back((*labels_)[idx]);
      if (dom) dom->push_back((*domains_)[idx]);
    }
    return FeatureDataset(indices.size(), dim_, std::move(out), std::move(lab), std::move(dom));
  }

  /// Bit-exact equality over every field.
  friend bool operator==(const FeatureDataset& a, const FeatureDataset& b) {
    if (a.n_ != b.n_ || a.dim_ != b.dim_ || a.labels_ != b.labels_ || a.domains_ != b.domains_) {
      return false;
    }
    return a.data_.empty() ||
           std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
  }

 private:
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::optional<std::vector<std::int32_t>> labels_;
  std::optional<std::vector<std::int32_t>> domains_;
};

/// Squared L2 distance with 64-bit accumulation.
inline double squared_distance(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    acc += d * d;
  }
  return acc;
}

struct NearestRef {
  double distance;  // squared
  std::size_t index;
};

/// For every query row, the minimum squared distance over `refs` and the lowest
/// index attaining it.
inline std::vector<NearestRef> pairwise_min_dist(const FeatureDataset& queries,
                                                 const FeatureDataset& refs) {
  require(queries.dim() == refs.dim(), "dimension mismatch: queries " +
                                           std::to_string(queries.dim()) + " vs refs " +
                                           std::to_string(refs.dim()));
  require(refs.size() >= 1, "reference set is empty");
  std::vector<NearestRef> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto q = queries.row(i);
    NearestRef best{squared_distance(q, refs.row(0)), 0};
    for (std::size_t j = 1; j < refs.size(); ++j) {
      const double d = squared_distance(q, refs.row(j));
      if (d < best.distance) best = {d, j};
    }
    out[i] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// .ecf binary format
//
//   "ECOS" | version u16 | flags u16 | n u64 | dim u32 | n*dim f32 |
//   [n i32 labels if flags&1] | [n i32 domains if flags&2]
//
// All integers and floats little-endian.
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 4> kEcfMagic = {'E', 'C', 'O', 'S'};
inline constexpr std::uint16_t kEcfVersion = 1;
inline constexpr std::uint16_t kEcfHasLabels = 1u << 0;
inline constexpr std::uint16_t kEcfHasDomains = 1u << 1;
inline constexpr std::size_t kEcfHeaderSize = 4 + 2 + 2 + 8 + 4;

namespace detail {

template <class T>
void put_le(std::vector<char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  auto bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
}

template <class T>
T get_le(const std::vector<char>& in, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<U>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return std::bit_cast<T>(bits);
}

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline std::vector<char> encode_ecf(const FeatureDataset& ds) {
  std::vector<char> out;
  out.reserve(kEcfHeaderSize + ds.data().size() * 4 + ds.size() * 8);
  for (char c : kEcfMagic) out.push_back(c);
  std::uint16_t flags = 0;
  if (ds.has_labels()) flags |= kEcfHasLabels;
  if (ds.has_domains()) flags |= kEcfHasDomains;
  detail::put_le<std::uint16_t>(out, kEcfVersion);
  detail::put_le<std::uint16_t>(out, flags);
  detail::put_le<std::uint64_t>(out, ds.size());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.dim()));
  for (float v : ds.data()) detail::put_le<float>(out, v);
  if (ds.has_labels()) {
    for (auto v : ds.labels()) detail::put_le<std::int32_t>(out, v);
  }
  if (ds.has_domains()) {
    for (auto v : ds.domains()) detail::put_le<std::int32_t>(out, v);
  }
  return out;
}

inline FeatureDataset decode_ecf(const std::vector<char>& bytes) {
  auto fail = [](std::size_t offset, const std::string& what) {
    throw FormatError(what + " at byte offset " + std::to_string(offset));
  };
  if (bytes.size() < kEcfHeaderSize) fail(bytes.size(), "truncated header");
  if (!std::equal(kEcfMagic.begin(), kEcfMagic.end(), bytes.begin())) fail(0, "bad magic");
  const auto version = detail::get_le<std::uint16_t>(bytes, 4);
  if (version != kEcfVersion) fail(4, "unsupported version " + std::to_string(version));
  const auto flags = detail::get_le<std::uint16_t>(bytes, 6);
  if (flags & ~(kEcfHasLabels | kEcfHasDomains)) fail(6, "unknown flag bits");
  const auto n = detail::get_le<std::uint64_t>(bytes, 8);
  const auto dim = detail::get_le<std::uint32_t>(bytes, 16);

  const bool has_labels = flags & kEcfHasLabels;
  const bool has_domains = flags & kEcfHasDomains;
  // Guard the size arithmetic before trusting n and dim.
  const std::size_t avail = bytes.size() - kEcfHeaderSize;
  if (dim != 0 && n > avail / 4 / dim) fail(kEcfHeaderSize, "dimension mismatch: payload too short");
  const std::size_t per_row = 4ull * dim + 4ull * (has_labels + has_domains);
  const std::size_t expected = kEcfHeaderSize + n * per_row;
  if (per_row != 0 && n > avail / per_row) fail(bytes.size(), "dimension mismatch: payload too short");
  if (bytes.size() != expected) {
    fail(std::min(bytes.size(), expected), "dimension mismatch: expected " +
                                               std::to_string(expected) + " bytes, found " +
                                               std::to_string(bytes.size()));
  }

  std::size_t off = kEcfHeaderSize;
  std::vector<float> data(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j, off += 4) {
      const float v = detail::get_le<float>(bytes, off);
      if (!std::isfinite(v)) {
        throw FormatError("non-finite at row " + std::to_string(i) + " (byte offset " +
                          std::to_string(off) + ")");
      }
      data[i * dim + j] = v;
    }
  }
  auto read_ints = [&]() {
    std::vector<std::int32_t> v(n);
    for (std::size_t i = 0; i < n; ++i, off += 4) v[i] = detail::get_le<std::int32_t>(bytes, off);
    return v;
  };
  std::optional<std::vector<std::int32_t>> labels, domains;
  if (has_labels) labels = read_ints();
  if (has_domains) domains = read_ints();
  return FeatureDataset(n, dim, std::move(data), std::move(labels), std::move(domains));
}

inline void save_dataset(const FeatureDataset& ds, const std::filesystem::path& path) {
  auto bytes = encode_ecf(ds);
  detail::write_file(path, {bytes.data(), bytes.size()});
}

/// Parses comma-separated rows. With `trailing_label` the last column is an
/// integer class label.
inline FeatureDataset parse_csv(std::string_view text, bool trailing_label = false) {
  std::vector<float> data;
  std::vector<std::int32_t> labels;
  std::size_t dim = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = detail::trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(detail::trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    std::size_t nfeat = fields.size();
    if (trailing_label) {
      if (nfeat < 2) throw FormatError("row " + std::to_string(rows) + ": missing label column");
      --nfeat;
      std::int32_t label = 0;
      auto f = fields.back();
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), label);
      if (ec != std::errc{} || p != f.data() + f.size() || label < 0) {
        throw FormatError("row " + std::to_string(rows) + ": bad label '" + std::string(f) + "'");
      }
      labels.push_back(label);
    }
    if (rows == 0) {
      dim = nfeat;
    } else if (nfeat != dim) {
      throw FormatError("dimension mismatch at row " + std::to_string(rows) + " (line " +
                        std::to_string(line_no) + "): expected " + std::to_string(dim) +
                        " columns, found " + std::to_string(nfeat));
    }
    for (std::size_t j = 0; j < nfeat; ++j) {
      float v = 0.0f;
      auto f = fields[j];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || p != f.data() + f.size()) {
        throw FormatError("row " + std::to_string(rows) + ": cannot parse '" + std::string(f) + "'");
      }
      if (!std::isfinite(v)) throw FormatError("non-finite at row " + std::to_string(rows));
      data.push_back(v);
    }
    ++rows;
  }
  std::optional<std::vector<std::int32_t>> lab;
  if (trailing_label) lab = std::move(labels);
  return FeatureDataset(rows, dim, std::move(data), std::move(lab));
}

enum class DatasetFormat { Binary, Csv };

inline FeatureDataset load_dataset(const std::filesystem::path& path,
                                   DatasetFormat format = DatasetFormat::Binary,
                                   bool csv_trailing_label = false) {
  auto bytes = detail::read_file(path);
  if (format == DatasetFormat::Binary) return decode_ecf(bytes);
  return parse_csv({bytes.data(), bytes.size()}, csv_trailing_label);
}

/// Picks the format from the extension: ".csv" is CSV, anything else .ecf.
inline DatasetFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::Binary;
}

}  // namespace ecos
