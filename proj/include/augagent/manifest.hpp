#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace augagent {

struct ClassLabel {
  int id = 0;
  std::string name;

  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

// Ordered label set; ids are the dense positions 0..size()-1.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Names are trimmed and lowercased. Throws DataError on an empty list,
  // an empty name or a duplicate.
  Vocabulary(std::string dataset_name, const std::vector<std::string>& names);

  // 21 categories including background.
  static Vocabulary voc();
  // 81 categories including background.
  static Vocabulary coco();

  const std::string& dataset_name() const { return dataset_name_; }
  const std::vector<ClassLabel>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool contains(int id) const { return id >= 0 && id < static_cast<int>(size()); }
  const std::string& name(int id) const { return labels_.at(id).name; }
  std::optional<int> find(std::string_view name) const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::string dataset_name_;
  std::vector<ClassLabel> labels_;
};

std::string normalize_label_name(std::string_view name);

enum class Provenance { original, augmented };

std::string_view to_string(Provenance p);

struct ImageRecord {
  std::string record_id;
  // Absolute in memory; written relative to the manifest's directory.
  std::filesystem::path image_path;
  std::set<int> labels;
  Provenance provenance = Provenance::original;
  std::optional<std::string> parent_id;
  std::optional<std::string> prompt;
  std::optional<double> target_score;
  int attempts = 0;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct DatasetManifest {
  Vocabulary vocabulary;
  std::vector<ImageRecord> records;
  double epsilon = 0.9;
  std::string created_at;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline constexpr int kManifestVersion = 1;

// Violations of the per-record invariants; empty means the record is valid.
std::vector<std::string> validate_record(const ImageRecord& record,
                                         const Vocabulary& vocab);

struct ManifestCheck {
  // When false, augmented parents may live in another manifest (an
  // augmented-only manifest whose parents are in the origin manifest).
  bool require_local_parents = true;
};

// Throws InvariantError on the first violation.
void validate_manifest(const DatasetManifest& manifest, ManifestCheck check = {});

// Manifest text; image paths are written relative to base_dir.
std::string serialize_manifest(const DatasetManifest& manifest,
                               const std::filesystem::path& base_dir);
DatasetManifest parse_manifest(std::string_view text,
                               const std::filesystem::path& base_dir,
                               ManifestCheck check = {});

// Whole-file rewrite through a temporary and rename.
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path,
                              ManifestCheck check = {});

// Number of records carrying each label, optionally restricted to one
// provenance.
std::vector<std::size_t> per_class_counts(
    const DatasetManifest& manifest,
    std::optional<Provenance> only = std::nullopt);

// UTC ISO-8601 timestamp for new manifests.
std::string utc_timestamp_now();

}  // namespace augagent
