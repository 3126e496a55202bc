#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "markush/image.hpp"

namespace markush {

/// Box around one Markush indicator, in parent-image coordinates.
struct AnnotationBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  Rect rect() const { return Rect{x, y, w, h}; }
  long long area() const { return static_cast<long long>(w) * h; }
  bool operator==(const AnnotationBox&) const = default;
};

struct AnnotatedImage {
  std::string image_id;
  std::string path;
  bool label = false;  // true = contains at least one Markush structure
  std::vector<AnnotationBox> annotations;
};

enum class Split { train, validation, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct DatasetManifest {
  std::vector<AnnotatedImage> entries;
  std::map<std::string, Split> split_assignment;  // empty until split_dataset ran

  bool has_splits() const { return !split_assignment.empty(); }
  const AnnotatedImage* find(const std::string& image_id) const;
  std::vector<const AnnotatedImage*> entries_in(Split s) const;

  /// Throws FormatError if ids collide, a false-labeled entry carries
  /// annotations, or the split assignment does not match the entries 1:1.
  void validate() const;
};

/// Manifest JSON, strict schema: unknown fields are rejected.
DatasetManifest manifest_from_json_text(const std::string& text);
std::string manifest_to_json_text(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

/// Deterministic label-stratified split. Every entry lands in exactly one
/// split; per-label counts follow the ratios by largest remainder.
/// Throws std::invalid_argument for bad ratios and std::runtime_error when
/// the manifest is too small to populate all three splits.
DatasetManifest split_dataset(const DatasetManifest& manifest, const SplitRatios& ratios,
                              std::uint64_t seed);

struct DatasetStats {
  long long n_true = 0;
  long long n_false = 0;
  double mean_annotations_per_true = 0.0;  // 0 when there are no true images
  int q99_annotation_width = 0;            // nearest-rank over all annotations
  int q99_annotation_height = 0;
  double label_ratio_false = 0.0;  // fraction of images labeled false
  double label_ratio_true = 0.0;
};

DatasetStats dataset_stats(const DatasetManifest& manifest);

/// Nearest-rank quantile: value at index ceil(q*n) of the ascending sort.
int nearest_rank_quantile(std::vector<int> values, double q);

/// Manifest plus decoded rasters, images[i] matching manifest.entries[i].
struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<GrayImage> images;
};

/// Reads every entry's raster; relative paths resolve against `root`.
LoadedDataset load_dataset(const DatasetManifest& manifest, const std::filesystem::path& root,
                           int jobs = 1);

}  // namespace markush
