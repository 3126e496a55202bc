#include "markush/feature_table.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "markush/errors.hpp"

namespace markush {

namespace {

void fill_row(double* row, const std::vector<BinaryDescriptor256>& query,
              const std::vector<std::vector<BinaryDescriptor256>>& templates, double ratio) {
  for (std::size_t t = 0; t < templates.size(); ++t) {
    const auto matches = match_ratio_test(query, templates[t], ratio);
    double* block = row + 6 * t;
    block[0] = static_cast<double>(matches.size());
    for (int k = 0; k < 5; ++k)
      block[1 + k] = k < static_cast<int>(matches.size())
                         ? static_cast<double>(matches[static_cast<std::size_t>(k)].distance)
                         : kMissingMatchDistance;
  }
}

}  // namespace

FeatureTable build_feature_table_from_descriptors(
    const std::vector<std::vector<BinaryDescriptor256>>& query_descs,
    const std::vector<std::vector<BinaryDescriptor256>>& template_descs, double match_ratio,
    int jobs) {
  if (query_descs.empty() || template_descs.empty())
    throw std::invalid_argument("feature table: need at least one query and one template");

  FeatureTable table;
  table.n_templates = static_cast<int>(template_descs.size());
  table.values.assign(query_descs.size() * static_cast<std::size_t>(table.cols()), 0.0);

  const std::size_t n = query_descs.size();
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t r = begin; r < n; r += step)
      fill_row(table.values.data() + r * static_cast<std::size_t>(table.cols()), query_descs[r],
               template_descs, match_ratio);
  };
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work, static_cast<std::size_t>(t), workers);
    for (auto& t : pool) t.join();
  }
  return table;
}

FeatureTable build_feature_table(const std::vector<GrayImage>& queries,
                                 const std::vector<GrayImage>& templates, const OrbConfig& cfg,
                                 int jobs) {
  cfg.validate();
  std::vector<std::vector<BinaryDescriptor256>> query_descs(queries.size());
  std::vector<std::vector<BinaryDescriptor256>> template_descs(templates.size());

  const std::size_t total = queries.size() + templates.size();
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(total)));
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < total; i += step) {
      if (i < queries.size())
        query_descs[i] = detect_and_describe(queries[i], cfg).descriptors;
      else
        template_descs[i - queries.size()] =
            detect_and_describe(templates[i - queries.size()], cfg).descriptors;
    }
  };
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work, static_cast<std::size_t>(t), workers);
    for (auto& t : pool) t.join();
  }
  return build_feature_table_from_descriptors(query_descs, template_descs, cfg.match_ratio, jobs);
}

void write_feature_table_csv(const FeatureTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());

  out << "image_id,label";
  for (int t = 0; t < table.n_templates; ++t) {
    out << ",t" << t << "_count";
    for (int k = 1; k <= 5; ++k) out << ",t" << t << "_d" << k;
  }
  out << "\n";

  char buf[64];
  for (int r = 0; r < table.n_rows(); ++r) {
    out << (r < static_cast<int>(table.row_ids.size()) ? table.row_ids[static_cast<std::size_t>(r)]
                                                       : std::to_string(r));
    out << ",";
    if (table.labels) out << ((*table.labels)[static_cast<std::size_t>(r)] ? 1 : 0);
    for (int c = 0; c < table.cols(); ++c) {
      const double v = table.at(r, c);
      // Counts and distances are integral; print them without a fraction.
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace markush
