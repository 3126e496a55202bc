#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "markush/image.hpp"
#include "markush/orb.hpp"

namespace markush {

/// Hamming distance slot for a missing match: one past the worst real value.
inline constexpr double kMissingMatchDistance = 257.0;

/// Match-statistics matrix: one row per query image, 6 columns per template:
/// [match_count, d1, d2, d3, d4, d5] with d1..d5 the five smallest
/// ratio-test-surviving distances, padded with 257.
struct FeatureTable {
  int n_templates = 0;
  std::vector<std::string> row_ids;            // may be empty
  std::optional<std::vector<bool>> labels;     // set for training tables
  std::vector<double> values;                  // row-major, rows x 6*n_templates

  int n_rows() const { return n_templates == 0 ? 0 : static_cast<int>(values.size()) / cols(); }
  int cols() const { return 6 * n_templates; }
  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * cols() + col]; }
  const double* row(int r) const { return values.data() + static_cast<std::size_t>(r) * cols(); }
};

/// One feature-table row block per (query, template) pair.
FeatureTable build_feature_table(const std::vector<GrayImage>& queries,
                                 const std::vector<GrayImage>& templates, const OrbConfig& cfg,
                                 int jobs = 1);

/// Same table from precomputed descriptor sets (queries and templates are
/// described once, then reused across grid-search cells).
FeatureTable build_feature_table_from_descriptors(
    const std::vector<std::vector<BinaryDescriptor256>>& query_descs,
    const std::vector<std::vector<BinaryDescriptor256>>& template_descs, double match_ratio,
    int jobs = 1);

/// CSV export: image_id,label,t0_count,t0_d1..t0_d5,t1_count,...
void write_feature_table_csv(const FeatureTable& table, const std::filesystem::path& path);

}  // namespace markush
