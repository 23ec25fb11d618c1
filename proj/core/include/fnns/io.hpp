#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fnns/boundary.hpp"
#include "fnns/forensics.hpp"
#include "fnns/nn.hpp"
#include "fnns/plan.hpp"
#include "fnns/tensor.hpp"

namespace fnns::io {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

// --- IDX ---------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Images of an unsigned-byte IDX file (magic 0x00000803) as [h, w, 1]
/// tensors scaled by exact division by 255.
std::vector<Tensor> parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::size_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<Tensor> load_idx_images(const std::filesystem::path& path);
std::vector<std::size_t> load_idx_labels(const std::filesystem::path& path);
/// Throws FormatError when the two files disagree in count.
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Pixels are mapped back with round(clamp(x, 0, 1) * 255); all images must share [h, w, 1].
Bytes encode_idx_images(const std::vector<Tensor>& images);
Bytes encode_idx_labels(const std::vector<std::size_t>& labels);

/// "path/to/file.idx#12" -> (path, 12). A missing "#" selects index 0.
struct InputRef {
  std::filesystem::path path;
  std::size_t index = 0;
  /// Stable id used as fingerprint key: file name + "#" + index.
  std::string id() const;
};
InputRef parse_input_ref(std::string_view text);

// --- FNNS container --------------------------------------------------------

inline constexpr std::uint16_t kContainerVersion = 1;

/// Byte layout, all integers little-endian:
///   "FNNS" | u16 version | u16 kind length | kind | u32 manifest length |
///   manifest (UTF-8 JSON) | u64 blob length | blob (f32 LE, manifest order)
using Container = std::variant<Model, ComputePlan, Tensor>;

Bytes encode_model(const Model& model);
Bytes encode_plan(const ComputePlan& plan);
Bytes encode_tensor(const Tensor& tensor, std::string_view name = "tensor");

/// Throws FormatError on any inconsistency.
Container decode_container(std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path& path, const Model& model);
void save_plan(const std::filesystem::path& path, const ComputePlan& plan);
void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
Container load_container(const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);
ComputePlan load_plan(const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

// --- fingerprint DB (one JSON record per line) ------------------------------

std::string encode_db_record(const FingerprintKey& key, const OutputDigest& digest);
/// Later lines replace earlier ones with the same key.
FingerprintDB parse_db(std::string_view text);
std::string encode_db(const FingerprintDB& db);

/// Missing file loads as an empty DB.
FingerprintDB load_db(const std::filesystem::path& path);
void save_db(const std::filesystem::path& path, const FingerprintDB& db);
/// Appends one line under an exclusive advisory lock.
void append_db_record(const std::filesystem::path& path, const FingerprintKey& key, const OutputDigest& digest);

// --- reports ---------------------------------------------------------------

inline constexpr int kReportSchemaVersion = 1;

struct BoundaryBlock {
  std::size_t original_label = 0;
  std::size_t iterations = 0;
  float final_gap = 0.0f;
  /// nullopt encodes +inf (sample identical to the input).
  std::optional<double> psnr_db;
  bool flipped = false;
  BoundaryParams params;
  std::vector<ProfilePrediction> predictions;

  static BoundaryBlock from(const BoundaryResult& r, const BoundaryParams& params);
};

struct ReportDocument {
  std::string model;
  std::string input;
  EquivalenceReport report;
  std::optional<BoundaryBlock> boundary;
};

nlohmann::json report_to_json(const ReportDocument& doc);
/// Validates the partition; throws FormatError.
ReportDocument report_from_json(const nlohmann::json& j);

nlohmann::json sweep_to_json(const std::vector<SweepColumn>& sweep, std::string_view input);

bool operator==(const BoundaryBlock& a, const BoundaryBlock& b);
bool operator==(const ReportDocument& a, const ReportDocument& b);

// --- previews --------------------------------------------------------------

/// Binary 8-bit PGM of channel 0 of an [h, w, c] tensor, values clamped to [0, 1].
Bytes encode_pgm(const Tensor& image);

}  // namespace fnns::io
