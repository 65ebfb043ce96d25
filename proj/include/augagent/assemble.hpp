#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "augagent/manifest.hpp"
#include "augagent/scorer.hpp"

namespace augagent {

// Union of an origin manifest and an augmented manifest. Requires equal
// vocabularies, disjoint record ids and every augmented parent resolving to
// an original record of the union. Throws DataError naming the offender.
DatasetManifest assemble(const DatasetManifest& origin, const DatasetManifest& aug);

// (1 + cos(u, v)) / 2. Throws DataError on a size mismatch or zero vector.
template <typename DerivedU, typename DerivedV>
typename DerivedU::Scalar normalized_similarity(const Eigen::MatrixBase<DerivedU>& u,
                                                const Eigen::MatrixBase<DerivedV>& v) {
  using Scalar = typename DerivedU::Scalar;
  if (u.size() != v.size() || u.size() == 0) throw DataError("embedding sizes differ");
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (nu == Scalar(0) || nv == Scalar(0)) throw DataError("zero-norm embedding");
  const Scalar cosine = std::clamp(u.dot(v) / (nu * nv), Scalar(-1), Scalar(1));
  return (Scalar(1) + cosine) / Scalar(2);
}

// Whole-image embedding used for similarity.
class VectorEmbedder {
 public:
  virtual ~VectorEmbedder() = default;
  virtual Eigen::VectorXd embed(const RgbImage& image) = 0;
};

// Mean of the patch embeddings of the 384x384-resized image.
class MeanPooledEmbedder : public VectorEmbedder {
 public:
  explicit MeanPooledEmbedder(EmbeddingBackend& patches) : patches_(patches) {}
  Eigen::VectorXd embed(const RgbImage& image) override;

 private:
  EmbeddingBackend& patches_;
};

struct SimilarityPair {
  std::string parent_id;
  std::string child_id;
  double similarity = 0.0;
};

struct SimilarityReport {
  std::vector<SimilarityPair> pairs;
  double mean = 0.0;
  std::optional<ClassLabel> class_filter;
  std::string method;
};

struct SimilarityOptions {
  std::optional<std::string> class_filter;
  std::size_t sample_size = 100;
  std::uint64_t seed = 0;
  std::string method = "Controlled Self-Refined Diffusion";
  int jobs = 1;
};

// Seeded sample without replacement of (parent, child) pairs, optionally
// restricted to children carrying one class.
SimilarityReport similarity_report(const DatasetManifest& manifest, VectorEmbedder& embedder,
                                   const SimilarityOptions& options);

std::string similarity_report_json(const SimilarityReport& report);

struct SimilarityRow {
  std::string image_class;
  std::size_t size = 0;
  std::string method;
  double mean = 0.0;
};

SimilarityRow summary_row(const SimilarityReport& report);

// Aligned text table: Image class | Image Size | Augmentation Method |
// Mean Similarity, means at three decimals.
std::string format_similarity_table(std::span<const SimilarityRow> rows);

}  // namespace augagent
