#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lars/matrix.hpp"
#include "lars/rng.hpp"

namespace lars {

// Whole file; gzip input (magic 1f 8b) is inflated transparently.
std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);

// IDX image container: big-endian magic 0x00000803, dims (N, rows, cols),
// then N*rows*cols unsigned bytes. Returns N x (rows*cols) intensities / 255.
Matrix parse_idx_images(const std::vector<unsigned char>& bytes);
Matrix load_idx_images(const std::filesystem::path& path);
// IDX label container: magic 0x00000801, dim N, N bytes.
std::vector<std::uint8_t> parse_idx_labels(const std::vector<unsigned char>& bytes);
std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path);

// One image per line, whitespace-separated values in {0, 1} (any float
// spelling of them). ParseError offsets are 1-based line numbers.
Matrix parse_binarized_text(const std::string& text, std::size_t expected_cols = 784);
Matrix load_binarized_text(const std::filesystem::path& path, std::size_t expected_cols = 784);

enum class Binarization { kDynamic, kStatic };

// Dynamic: every pixel ~ Bernoulli(intensity), fresh per call.
// Static: data must already be binary and is returned unchanged.
Matrix binarize(const Matrix& batch, Binarization mode, Rng& rng);

enum class DataSource { kIdx, kBinarizedText };

struct DatasetSpec {
  DataSource source = DataSource::kIdx;
  std::filesystem::path images;  // idx images
  std::filesystem::path labels;  // optional idx labels
  std::filesystem::path text;    // binarized text
  Binarization binarization = Binarization::kDynamic;
  std::size_t subset = 0;  // 0 = all
  std::size_t train = 9000;
  std::size_t valid = 0;
  std::size_t test = 1000;
};

struct Dataset {
  Matrix train;
  Matrix valid;
  Matrix test;
  Binarization binarization = Binarization::kDynamic;
};

// Splits are consecutive ranges of the (optionally truncated) file.
Dataset load_dataset(const DatasetSpec& spec);

// Fixed binarization of a held-out split, so that evaluation sees the same
// binary images every time for a given seed.
Matrix binarize_fixed(const Matrix& images, Binarization mode, std::uint64_t seed);

}  // namespace lars
