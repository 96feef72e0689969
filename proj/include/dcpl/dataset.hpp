#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcpl/mathcore.hpp"
#include "dcpl/model.hpp"

namespace dcpl {

using Labels = std::vector<std::size_t>;

// Two-view target (or source) dataset.
//   features_f: n x d_f, the view consumed by the classification head.
//   features_p: n x d_p, the view of the frozen pretrained extractor.
struct Dataset {
  std::size_t k = 0;
  Mat features_f;
  Mat features_p;
  std::optional<Labels> true_labels;
  std::optional<Labels> pseudo_labels;
  // Optional extra sections carried by the binary container.
  std::optional<ModelParams> source_head;
  std::optional<Mat> projection;  // d_p x d_f map that generated features_p

  std::size_t n() const noexcept { return features_f.rows(); }
  std::size_t d_f() const noexcept { return features_f.cols(); }
  std::size_t d_p() const noexcept { return features_p.cols(); }

  bool operator==(const Dataset&) const = default;
};

// Throws a located FormatError / DegenerateInputError on any invariant
// violation: empty dataset, row-count mismatch, label outside [0, k),
// non-finite feature, inconsistent embedded head.
void validate(const Dataset& ds);

// Container flags (u32 bitfield in the header).
inline constexpr std::uint32_t kFlagTrueLabels = 1u << 0;
inline constexpr std::uint32_t kFlagPseudoLabels = 1u << 1;
inline constexpr std::uint32_t kFlagSourceHead = 1u << 2;
inline constexpr std::uint32_t kFlagProjection = 1u << 3;
inline constexpr std::uint16_t kFormatVersion = 1;

struct LoadOptions {
  // Class count for CSV input without a label column (or to override the
  // max-label inference). Ignored for the binary container.
  std::optional<std::size_t> k;
};

// Reads the binary container (magic "DCPL") or the CSV form
// `id,label?,f_0..f_{d_f-1},p_0..p_{d_p-1}`; the format is sniffed from the
// first bytes. Result is validated.
Dataset load_dataset(const std::string& path, const LoadOptions& opts = {});
Dataset load_dataset_csv(const std::string& path, const LoadOptions& opts = {});

// Byte-deterministic binary container, written via temp file + rename.
void save_dataset(const Dataset& ds, const std::string& path);
std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

// Standalone head file: magic "DCPH", u16 version, then the same head
// section the dataset container embeds (u32 k, u32 d_f, f64 weights, f64 bias).
void save_head(const ModelParams& head, const std::string& path);
ModelParams load_head(const std::string& path);

// Writes bytes to path atomically (temp file in the same directory, then
// rename). Throws FormatError when the path is not writable.
void write_file_atomic(const std::string& path, const std::string& contents);
void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& contents);

// k rows of comma-separated values, "%.17g".
std::string matrix_to_csv(const Mat& m);
Mat matrix_from_csv(const std::string& text);

}  // namespace dcpl
