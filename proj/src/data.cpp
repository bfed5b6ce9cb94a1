#include "lars/data.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include <zlib.h>

#include "lars/distributions.hpp"
#include "lars/errors.hpp"

namespace lars {

namespace {

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw std::runtime_error("zlib init failed");
  std::vector<unsigned char> out;
  unsigned char buf[1 << 16];
  zs.next_in = const_cast<unsigned char*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      const std::size_t at = zs.total_in;
      inflateEnd(&zs);
      throw ParseError("corrupt gzip stream", at);
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      const std::size_t at = zs.total_in;
      inflateEnd(&zs);
      throw ParseError("truncated gzip stream", at);
    }
  }
  inflateEnd(&zs);
  return out;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
  if (at + 4 > b.size()) throw ParseError("truncated IDX header", b.size());
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes);
  return bytes;
}

Matrix parse_idx_images(const std::vector<unsigned char>& b) {
  if (b.size() < 4) throw ParseError("truncated IDX magic", b.size());
  const std::uint32_t magic = be32(b, 0);
  if (magic != 0x00000803) throw ParseError("not an IDX image file (magic " + std::to_string(magic) + ")", 0);
  const std::size_t n = be32(b, 4), rows = be32(b, 8), cols = be32(b, 12);
  const std::size_t need = 16 + n * rows * cols;
  if (b.size() < need) throw ParseError("truncated IDX image data", b.size());
  if (b.size() > need) throw ParseError("trailing bytes after IDX image data", need);
  Matrix out(n, rows * cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = static_cast<double>(b[16 + i]) / 255.0;
  return out;
}

Matrix load_idx_images(const std::filesystem::path& path) { return parse_idx_images(read_file_bytes(path)); }

std::vector<std::uint8_t> parse_idx_labels(const std::vector<unsigned char>& b) {
  if (b.size() < 4) throw ParseError("truncated IDX magic", b.size());
  const std::uint32_t magic = be32(b, 0);
  if (magic != 0x00000801) throw ParseError("not an IDX label file (magic " + std::to_string(magic) + ")", 0);
  const std::size_t n = be32(b, 4);
  if (b.size() < 8 + n) throw ParseError("truncated IDX label data", b.size());
  if (b.size() > 8 + n) throw ParseError("trailing bytes after IDX label data", 8 + n);
  return {b.begin() + 8, b.end()};
}

std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path) {
  return parse_idx_labels(read_file_bytes(path));
}

Matrix parse_binarized_text(const std::string& text, std::size_t expected_cols) {
  std::vector<double> values;
  std::size_t rows = 0;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    std::size_t cols = 0;
    while (ls >> tok) {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size()) throw ParseError("bad value '" + tok + "'", lineno);
      if (v != 0.0 && v != 1.0) throw ParseError("non-binary value '" + tok + "'", lineno);
      values.push_back(v);
      ++cols;
    }
    if (cols == 0) continue;
    if (cols != expected_cols)
      throw ParseError("expected " + std::to_string(expected_cols) + " values, got " + std::to_string(cols), lineno);
    ++rows;
  }
  return Matrix(rows, expected_cols, std::move(values));
}

Matrix load_binarized_text(const std::filesystem::path& path, std::size_t expected_cols) {
  const auto bytes = read_file_bytes(path);
  return parse_binarized_text(std::string(bytes.begin(), bytes.end()), expected_cols);
}

Matrix binarize(const Matrix& batch, Binarization mode, Rng& rng) {
  if (mode == Binarization::kStatic) {
    LARS_REQUIRE(is_binary(batch), "static binarization needs binary data");
    return batch;
  }
  Matrix out(batch.rows, batch.cols);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double p = batch.data[i];
    LARS_REQUIRE(p >= 0.0 && p <= 1.0, "intensities must lie in [0, 1]");
    out.data[i] = rng.uniform() < p ? 1.0 : 0.0;
  }
  return out;
}

Matrix binarize_fixed(const Matrix& images, Binarization mode, std::uint64_t seed) {
  Rng rng(seed);
  return binarize(images, mode, rng);
}

Dataset load_dataset(const DatasetSpec& spec) {
  Matrix all;
  if (spec.source == DataSource::kIdx) {
    all = load_idx_images(spec.images);
    if (!spec.labels.empty()) {
      const auto labels = load_idx_labels(spec.labels);
      if (labels.size() != all.rows) throw ConfigError("label count does not match image count");
    }
  } else {
    LARS_REQUIRE(spec.binarization == Binarization::kStatic, "binarized text data needs static binarization");
    all = load_binarized_text(spec.text);
  }
  if (spec.subset > 0 && spec.subset < all.rows) all = all.slice_rows(0, spec.subset);
  const std::size_t need = spec.train + spec.valid + spec.test;
  if (need > all.rows)
    throw ConfigError("splits need " + std::to_string(need) + " images, file has " + std::to_string(all.rows));
  if (spec.binarization == Binarization::kStatic && !is_binary(all))
    throw ConfigError("static binarization requested for grayscale data");
  Dataset d;
  d.binarization = spec.binarization;
  d.train = all.slice_rows(0, spec.train);
  d.valid = all.slice_rows(spec.train, spec.valid);
  d.test = all.slice_rows(spec.train + spec.valid, spec.test);
  return d;
}

}  // namespace lars
