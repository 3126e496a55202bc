#include "markush/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "markush/errors.hpp"
#include "markush/image_io.hpp"
#include "markush/rng.hpp"

namespace markush {

using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  throw std::logic_error("bad Split value");
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw FormatError("unknown split name: " + s);
}

const AnnotatedImage* DatasetManifest::find(const std::string& image_id) const {
  for (const auto& e : entries)
    if (e.image_id == image_id) return &e;
  return nullptr;
}

std::vector<const AnnotatedImage*> DatasetManifest::entries_in(Split s) const {
  std::vector<const AnnotatedImage*> out;
  for (const auto& e : entries) {
    auto it = split_assignment.find(e.image_id);
    if (it != split_assignment.end() && it->second == s) out.push_back(&e);
  }
  return out;
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.image_id).second)
      throw FormatError("duplicate image id: " + e.image_id);
    if (!e.label && !e.annotations.empty())
      throw FormatError("false-labeled image has annotations: " + e.image_id);
    for (const auto& a : e.annotations) {
      if (a.x < 0 || a.y < 0 || a.w < 1 || a.h < 1)
        throw FormatError("bad annotation box in " + e.image_id);
    }
  }
  if (!split_assignment.empty()) {
    if (split_assignment.size() != entries.size())
      throw FormatError("split assignment does not cover every entry exactly once");
    for (const auto& [id, s] : split_assignment) {
      (void)s;
      if (ids.count(id) == 0) throw FormatError("split assignment names unknown id: " + id);
    }
  }
}

namespace {

void reject_unknown_fields(const json& obj, std::initializer_list<const char*> allowed,
                           const char* where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end())
      throw FormatError(std::string("manifest: unknown field \"") + key + "\" in " + where);
  }
}

}  // namespace

DatasetManifest manifest_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest: not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("manifest: top level must be an object");
  reject_unknown_fields(doc, {"images", "splits"}, "top level");
  if (!doc.contains("images") || !doc["images"].is_array())
    throw FormatError("manifest: missing \"images\" array");

  DatasetManifest m;
  for (const auto& je : doc["images"]) {
    if (!je.is_object()) throw FormatError("manifest: image entry must be an object");
    reject_unknown_fields(je, {"id", "path", "label", "annotations"}, "image entry");
    AnnotatedImage e;
    e.image_id = je.at("id").get<std::string>();
    e.path = je.at("path").get<std::string>();
    e.label = je.at("label").get<bool>();
    if (je.contains("annotations")) {
      for (const auto& ja : je["annotations"]) {
        reject_unknown_fields(ja, {"x", "y", "w", "h"}, "annotation");
        AnnotationBox box;
        box.x = ja.at("x").get<int>();
        box.y = ja.at("y").get<int>();
        box.w = ja.at("w").get<int>();
        box.h = ja.at("h").get<int>();
        e.annotations.push_back(box);
      }
    }
    m.entries.push_back(std::move(e));
  }
  if (doc.contains("splits")) {
    if (!doc["splits"].is_object()) throw FormatError("manifest: \"splits\" must be an object");
    for (const auto& [id, name] : doc["splits"].items())
      m.split_assignment[id] = split_from_string(name.get<std::string>());
  }
  m.validate();
  return m;
}

std::string manifest_to_json_text(const DatasetManifest& manifest) {
  json doc;
  doc["images"] = json::array();
  for (const auto& e : manifest.entries) {
    json je;
    je["id"] = e.image_id;
    je["path"] = e.path;
    je["label"] = e.label;
    je["annotations"] = json::array();
    for (const auto& a : e.annotations)
      je["annotations"].push_back({{"x", a.x}, {"y", a.y}, {"w", a.w}, {"h", a.h}});
    doc["images"].push_back(std::move(je));
  }
  if (!manifest.split_assignment.empty()) {
    json splits = json::object();
    for (const auto& [id, s] : manifest.split_assignment) splits[id] = to_string(s);
    doc["splits"] = std::move(splits);
  }
  return doc.dump(2) + "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return manifest_from_json_text(text);
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << manifest_to_json_text(manifest);
}

namespace {

// Largest-remainder apportionment of n items over the three ratios.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& r) {
  const double ratios[3] = {r.train, r.validation, r.test};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * ratios[i];
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (remainder[i] > remainder[best]) best = i;
    counts[best]++;
    remainder[best] = -1.0;
    ++assigned;
  }
  return counts;
}

}  // namespace

DatasetManifest split_dataset(const DatasetManifest& manifest, const SplitRatios& ratios,
                              std::uint64_t seed) {
  if (!(ratios.train > 0.0 && ratios.validation > 0.0 && ratios.test > 0.0))
    throw std::invalid_argument("split_dataset: ratios must be positive");
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: ratios must sum to 1");
  if (manifest.entries.size() < 3)
    throw std::runtime_error("split_dataset: need at least 3 images");

  DatasetManifest out = manifest;
  out.split_assignment.clear();

  // Stratify: apportion each label group separately.
  for (const bool label : {false, true}) {
    std::vector<std::string> ids;
    for (const auto& e : manifest.entries)
      if (e.label == label) ids.push_back(e.image_id);
    if (ids.empty()) continue;
    std::sort(ids.begin(), ids.end());
    Rng rng(seed ^ (label ? 0x5B5Bu : 0xA4A4u));
    rng.shuffle(ids);

    const auto counts = apportion(ids.size(), ratios);
    std::size_t pos = 0;
    const Split splits[3] = {Split::train, Split::validation, Split::test};
    for (int s = 0; s < 3; ++s)
      for (std::size_t k = 0; k < counts[s]; ++k) out.split_assignment[ids[pos++]] = splits[s];
  }

  for (const Split s : {Split::train, Split::validation, Split::test}) {
    if (out.entries_in(s).empty())
      throw std::runtime_error("split_dataset: too few images to populate the " + to_string(s) +
                               " split");
  }
  return out;
}

int nearest_rank_quantile(std::vector<int> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty list");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

DatasetStats dataset_stats(const DatasetManifest& manifest) {
  if (manifest.entries.empty()) throw std::runtime_error("dataset_stats: empty manifest");

  DatasetStats st;
  long long total_annotations = 0;
  std::vector<int> widths;
  std::vector<int> heights;
  for (const auto& e : manifest.entries) {
    if (e.label)
      ++st.n_true;
    else
      ++st.n_false;
    total_annotations += static_cast<long long>(e.annotations.size());
    for (const auto& a : e.annotations) {
      widths.push_back(a.w);
      heights.push_back(a.h);
    }
  }
  if (st.n_true > 0)
    st.mean_annotations_per_true =
        static_cast<double>(total_annotations) / static_cast<double>(st.n_true);
  if (!widths.empty()) {
    st.q99_annotation_width = nearest_rank_quantile(widths, 0.99);
    st.q99_annotation_height = nearest_rank_quantile(heights, 0.99);
  }
  const double total = static_cast<double>(st.n_true + st.n_false);
  st.label_ratio_false = static_cast<double>(st.n_false) / total;
  st.label_ratio_true = static_cast<double>(st.n_true) / total;
  return st;
}

LoadedDataset load_dataset(const DatasetManifest& manifest, const std::filesystem::path& root,
                           int jobs) {
  LoadedDataset ds;
  ds.manifest = manifest;
  ds.images.resize(manifest.entries.size());

  const std::size_t n = manifest.entries.size();
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < n; i += step) {
      try {
        std::filesystem::path p = manifest.entries[i].path;
        if (p.is_relative()) p = root / p;
        ds.images[i] = load_image(p);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work, static_cast<std::size_t>(t), workers);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return ds;
}

}  // namespace markush
