#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fnns/arith.hpp"
#include "fnns/nn.hpp"
#include "fnns/tensor.hpp"

namespace fnns {

/// Environments grouped by bit-identical output.
///
/// Subjects are ordered by registry rank (unknown ids after, by name), classes
/// by the first subject that belongs to them, and class labels run A, B, ...
/// per report.
struct EquivalenceReport {
  std::vector<std::string> subjects;
  std::vector<std::vector<std::string>> classes;
  /// Digest of each subject's output, parallel to `subjects`.
  std::vector<OutputDigest> digests;

  std::size_t class_count() const { return classes.size(); }
  /// Class index of a subject; throws LookupError if absent.
  std::size_t class_of(const std::string& subject) const;
  const OutputDigest& digest_of(const std::string& subject) const;

  friend bool operator==(const EquivalenceReport&, const EquivalenceReport&) = default;
};

/// "A".."Z", "AA", "AB", ...
std::string class_label(std::size_t index);

/// Throws ShapeError when outputs disagree in shape, std::invalid_argument when empty.
EquivalenceReport partition(const std::map<std::string, Tensor>& outputs);

/// Partition of precomputed digests (used for plan fingerprints).
EquivalenceReport partition_digests(const std::map<std::string, OutputDigest>& digests);

/// Runs `model` on `input` under every profile and partitions the outputs.
EquivalenceReport partition_profiles(const Model& model, const Tensor& input,
                                     const std::vector<ExecProfile>& profiles);

/// Fixed-width text table: one row per subject with its class letter and digest prefix.
std::string render_report(const EquivalenceReport& report);

struct FingerprintKey {
  std::string model;
  std::string input;
  std::string profile;

  friend auto operator<=>(const FingerprintKey&, const FingerprintKey&) = default;
};

/// In-memory enrolment store; persistence lives in io.hpp.
class FingerprintDB {
 public:
  /// Throws std::invalid_argument on a duplicate key unless `overwrite`.
  void enroll(const FingerprintKey& key, const OutputDigest& digest, bool overwrite = false);
  void enroll(const FingerprintKey& key, const Tensor& output, bool overwrite = false) {
    enroll(key, digest(output), overwrite);
  }

  std::optional<OutputDigest> lookup(const FingerprintKey& key) const;

  /// Profiles whose stored digest equals digest(observed), in registry order.
  /// An empty result means the environment is unknown. Throws LookupError when
  /// nothing is enrolled for (model, input).
  std::vector<std::string> identify(const std::string& model, const std::string& input,
                                    const Tensor& observed) const;
  std::vector<std::string> identify(const std::string& model, const std::string& input,
                                    const OutputDigest& observed) const;

  std::size_t size() const { return records_.size(); }
  const std::map<FingerprintKey, OutputDigest>& records() const { return records_; }

  friend bool operator==(const FingerprintDB&, const FingerprintDB&) = default;

 private:
  std::map<FingerprintKey, OutputDigest> records_;
};

struct SweepColumn {
  MockSpec spec;
  EquivalenceReport report;
};

/// One report per mock model, all evaluated on the same input.
std::vector<SweepColumn> complexity_sweep(const std::vector<MockSpec>& specs,
                                          const std::vector<ExecProfile>& profiles, const Tensor& input);

/// Profiles as rows, mock models as columns, class letters as cells.
std::string render_sweep(const std::vector<SweepColumn>& sweep);

}  // namespace fnns
