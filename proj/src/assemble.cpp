#include "augagent/assemble.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "augagent/codec.hpp"
#include "augagent/errors.hpp"
#include "augagent/parallel.hpp"

namespace augagent {

DatasetManifest assemble(const DatasetManifest& origin, const DatasetManifest& aug) {
  if (!(origin.vocabulary == aug.vocabulary)) {
    throw DataError("vocabulary mismatch between '" + origin.vocabulary.dataset_name() +
                    "' and '" + aug.vocabulary.dataset_name() + "'");
  }
  DatasetManifest out = origin;
  std::unordered_set<std::string> ids;
  std::unordered_set<std::string> originals;
  for (const auto* m : {&origin, &aug}) {
    for (const auto& record : m->records) {
      if (!ids.insert(record.record_id).second) {
        throw DataError("record_id collision: " + record.record_id);
      }
      if (record.provenance == Provenance::original) originals.insert(record.record_id);
    }
  }
  for (const auto& record : aug.records) {
    if (record.parent_id && !originals.contains(*record.parent_id)) {
      throw DataError("record '" + record.record_id + "' has dangling parent '" +
                      *record.parent_id + "'");
    }
    out.records.push_back(record);
  }
  validate_manifest(out);
  return out;
}

Eigen::VectorXd MeanPooledEmbedder::embed(const RgbImage& image) {
  const PatchEmbeddings f =
      patches_.embed(resize_bilinear(image, kScorerImageSize, kScorerImageSize));
  if (f.rows() == 0) throw BackendError("embedder returned no patches");
  return f.colwise().mean().transpose();
}

SimilarityReport similarity_report(const DatasetManifest& manifest, VectorEmbedder& embedder,
                                   const SimilarityOptions& options) {
  SimilarityReport report;
  report.method = options.method;
  std::optional<int> filter;
  if (options.class_filter) {
    filter = manifest.vocabulary.find(*options.class_filter);
    if (!filter) throw DataError("unknown class '" + *options.class_filter + "'");
    report.class_filter = manifest.vocabulary.labels().at(*filter);
  }

  std::unordered_map<std::string, const ImageRecord*> by_id;
  for (const auto& record : manifest.records) by_id.emplace(record.record_id, &record);
  std::vector<std::pair<const ImageRecord*, const ImageRecord*>> eligible;
  for (const auto& record : manifest.records) {
    if (record.provenance != Provenance::augmented || !record.parent_id) continue;
    if (filter && !record.labels.contains(*filter)) continue;
    const auto parent = by_id.find(*record.parent_id);
    if (parent == by_id.end()) {
      throw DataError("record '" + record.record_id + "' has dangling parent");
    }
    eligible.emplace_back(parent->second, &record);
  }
  if (eligible.empty()) throw DataError("no augmented records to compare");

  const std::size_t take = std::min(options.sample_size, eligible.size());
  std::mt19937_64 rng(options.seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(take);

  report.pairs.resize(take);
  parallel_for(take, options.jobs, [&](std::size_t i) {
    const auto [parent, child] = eligible[i];
    const Eigen::VectorXd u = embedder.embed(read_png_rgb(parent->image_path));
    const Eigen::VectorXd v = embedder.embed(read_png_rgb(child->image_path));
    report.pairs[i] = {parent->record_id, child->record_id, normalized_similarity(u, v)};
  });
  double total = 0.0;
  for (const auto& pair : report.pairs) total += pair.similarity;
  report.mean = total / static_cast<double>(take);
  return report;
}

std::string similarity_report_json(const SimilarityReport& report) {
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  for (const auto& p : report.pairs) {
    pairs.push_back({{"child_id", p.child_id},
                     {"parent_id", p.parent_id},
                     {"similarity", std::stod(format_fixed6(p.similarity))}});
  }
  nlohmann::ordered_json j;
  j["class_filter"] = report.class_filter ? nlohmann::ordered_json(report.class_filter->name)
                                          : nlohmann::ordered_json(nullptr);
  j["mean"] = std::stod(format_fixed6(report.mean));
  j["method"] = report.method;
  j["pairs"] = pairs;
  j["size"] = report.pairs.size();
  return j.dump(2) + "\n";
}

SimilarityRow summary_row(const SimilarityReport& report) {
  std::string name = report.class_filter ? report.class_filter->name : "all";
  if (!name.empty()) name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
  return {name, report.pairs.size(), report.method, report.mean};
}

std::string format_similarity_table(std::span<const SimilarityRow> rows) {
  const std::array<std::string, 4> header = {"Image class", "Image Size",
                                             "Augmentation Method", "Mean Similarity"};
  std::vector<std::array<std::string, 4>> cells;
  cells.push_back(header);
  for (const auto& row : rows) {
    cells.push_back({row.image_class, std::to_string(row.size), row.method,
                     fmt::format("{:.3f}", row.mean)});
  }
  std::array<std::size_t, 4> width{};
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], line[c].size());
  }
  auto render = [&](const std::array<std::string, 4>& line) {
    // First column left-aligned, the rest centred.
    std::string out = fmt::format("{:<{}}", line[0], width[0]);
    for (std::size_t c = 1; c < 4; ++c) out += fmt::format(" | {:^{}}", line[c], width[c]);
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = render(cells.front());
  std::size_t rule = width[0];
  for (std::size_t c = 1; c < 4; ++c) rule += 3 + width[c];
  out += std::string(rule, '-') + "\n";
  for (std::size_t i = 1; i < cells.size(); ++i) out += render(cells[i]);
  return out;
}

}  // namespace augagent
