#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "augagent/errors.hpp"
#include "augagent/image.hpp"
#include "augagent/manifest.hpp"

namespace augagent {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Encoder input geometry: 384x384 images cut into 16x16 patches, giving a
// 24x24 grid of s = 576 patch embeddings.
inline constexpr int kScorerImageSize = 384;
inline constexpr int kPatchSize = 16;
inline constexpr int kPatchGrid = kScorerImageSize / kPatchSize;

// BCE inputs are clamped into [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-7;

// s x e matrix F of patch embeddings, one row per patch.
using PatchEmbeddings = Eigen::MatrixXd;

// Number of patches for an h x w image with d x d patches; throws DataError
// unless d divides both sides.
int patch_count(int height, int width, int patch_size);

// e x |C| linear head W.
struct LinearHead {
  Eigen::MatrixXd weights;

  Eigen::Index embedding_dim() const { return weights.rows(); }
  Eigen::Index num_classes() const { return weights.cols(); }
};

// Row-wise softmax of F W, stabilised by subtracting each row's maximum.
template <typename DerivedF, typename DerivedW>
MatrixX<typename DerivedF::Scalar> patch_scores(const Eigen::MatrixBase<DerivedF>& features,
                                                const Eigen::MatrixBase<DerivedW>& weights) {
  using Scalar = typename DerivedF::Scalar;
  if (features.cols() != weights.rows()) {
    throw DataError("patch embedding width does not match head rows");
  }
  if (!features.allFinite() || !weights.allFinite()) {
    throw DataError("non-finite patch embeddings or head weights");
  }
  MatrixX<Scalar> z = features * weights.template cast<Scalar>();
  z.colwise() -= z.rowwise().maxCoeff();
  z = z.array().exp().matrix();
  z.array().colwise() /= z.rowwise().sum().array();
  return z;
}

template <typename Scalar>
struct ImageScores {
  VectorX<Scalar> per_class;
  // First patch index attaining each class maximum.
  std::vector<Eigen::Index> argmax_patch;
};

// Global max pooling over patches, per class.
template <typename Derived>
ImageScores<typename Derived::Scalar> image_scores(const Eigen::MatrixBase<Derived>& z) {
  if (z.rows() == 0 || z.cols() == 0) throw DataError("empty patch score matrix");
  ImageScores<typename Derived::Scalar> out;
  out.per_class.resize(z.cols());
  out.argmax_patch.resize(static_cast<std::size_t>(z.cols()));
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    Eigen::Index row = 0;
    out.per_class[c] = z.col(c).maxCoeff(&row);
    out.argmax_patch[static_cast<std::size_t>(c)] = row;
  }
  return out;
}

// Mean per-class binary cross-entropy.
template <typename DerivedY, typename DerivedP>
typename DerivedP::Scalar mce_loss(const Eigen::MatrixBase<DerivedY>& targets,
                                   const Eigen::MatrixBase<DerivedP>& predicted) {
  using Scalar = typename DerivedP::Scalar;
  if (targets.size() != predicted.size() || predicted.size() == 0) {
    throw DataError("label and prediction lengths differ");
  }
  const Scalar lo(kProbClamp);
  const Scalar hi = Scalar(1) - lo;
  Scalar total(0);
  for (Eigen::Index c = 0; c < predicted.size(); ++c) {
    // Clamping 1 - p itself keeps log(1 - p) exact near p = 1.
    const Scalar p = std::clamp(predicted[c], lo, hi);
    const Scalar q = std::clamp(Scalar(1) - predicted[c], lo, hi);
    const Scalar y = static_cast<Scalar>(targets[c]);
    total -= y * std::log(p) + (Scalar(1) - y) * std::log(q);
  }
  return total / static_cast<Scalar>(predicted.size());
}

template <typename Scalar>
struct LossAndGradient {
  Scalar loss;
  MatrixX<Scalar> gradient;
};

// Loss and exact dL/dW through softmax -> max pooling -> BCE. Max pooling
// routes each class's gradient through its first argmax patch only; a
// clamped prediction contributes no gradient.
template <typename DerivedY, typename DerivedF, typename DerivedW>
LossAndGradient<typename DerivedF::Scalar> mce_loss_and_gradient(
    const Eigen::MatrixBase<DerivedY>& targets, const Eigen::MatrixBase<DerivedF>& features,
    const Eigen::MatrixBase<DerivedW>& weights) {
  using Scalar = typename DerivedF::Scalar;
  if (targets.size() != weights.cols()) throw DataError("label length differs from head columns");
  const MatrixX<Scalar> z = patch_scores(features, weights);
  const auto pooled = image_scores(z);
  const Eigen::Index classes = z.cols();
  const Scalar lo(kProbClamp);
  const Scalar hi = Scalar(1) - lo;

  LossAndGradient<Scalar> out{mce_loss(targets, pooled.per_class),
                              MatrixX<Scalar>::Zero(features.cols(), classes)};
  VectorX<Scalar> logit_grad(classes);
  for (Eigen::Index c = 0; c < classes; ++c) {
    const Scalar p = pooled.per_class[c];
    if (p < lo || p > hi) continue;
    const Scalar y = static_cast<Scalar>(targets[c]);
    const Scalar dloss_dp = (-y / p + (Scalar(1) - y) / (Scalar(1) - p)) /
                            static_cast<Scalar>(classes);
    const Eigen::Index patch = pooled.argmax_patch[static_cast<std::size_t>(c)];
    // d softmax_c / d logit_j = z_c (delta_cj - z_j)
    logit_grad = -p * z.row(patch).transpose();
    logit_grad[c] += p;
    out.gradient.noalias() += features.row(patch).transpose() * (dloss_dp * logit_grad).transpose();
  }
  return out;
}

template <typename DerivedY, typename DerivedF, typename DerivedW>
MatrixX<typename DerivedF::Scalar> mce_gradient(const Eigen::MatrixBase<DerivedY>& targets,
                                                const Eigen::MatrixBase<DerivedF>& features,
                                                const Eigen::MatrixBase<DerivedW>& weights) {
  return mce_loss_and_gradient(targets, features, weights).gradient;
}

// Frozen patch encoder. Receives images already resized to 384x384 and must
// be deterministic per image and safe for concurrent calls.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual PatchEmbeddings embed(const RgbImage& image) = 0;
};

// Deterministic hand-crafted patch features: an 8-bin luma histogram plus
// luma mean/std, mean absolute gradients, edge density, half-patch contrasts
// and a constant bias term. Built on luma only, so hue changes that keep
// luma leave the embedding nearly unchanged.
class MockEmbedder : public EmbeddingBackend {
 public:
  static constexpr int kDim = 16;
  PatchEmbeddings embed(const RgbImage& image) override;
};

struct TrainingSample {
  PatchEmbeddings features;
  Eigen::VectorXd targets;  // multi-hot, length |C|
};

struct TrainOptions {
  int epochs = 80;
  int batch_size = 16;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  // Initial weights are uniform in [-init_scale, init_scale].
  double init_scale = 0.01;
};

struct TrainResult {
  LinearHead head;
  // Mean per-sample loss of each epoch, evaluated at the weights each
  // minibatch step started from.
  std::vector<double> epoch_loss;
};

LinearHead initial_head(Eigen::Index embedding_dim, Eigen::Index num_classes,
                        const TrainOptions& options);

// Plain minibatch gradient descent with seeded per-epoch shuffling.
// Throws DataError on a non-finite loss.
TrainResult train_head(std::span<const TrainingSample> samples, Eigen::Index num_classes,
                       const TrainOptions& options);

// Embeds every original record of the manifest (resized to 384x384) and
// trains on them.
TrainResult train_head(const DatasetManifest& manifest, EmbeddingBackend& embedder,
                       const TrainOptions& options, int jobs = 1);

struct QualityScore {
  Eigen::VectorXd per_class;
  // min over the record's labels of per_class.
  double target_score = 0.0;
  std::vector<Eigen::Index> argmax_patch;
};

// Resize to 384x384, embed, softmax, max-pool, min over labels.
QualityScore score_image(const RgbImage& image, const std::set<int>& labels,
                         const LinearHead& head, EmbeddingBackend& embedder);

// Quality gate used by the augmentation loop.
class ImageScorer {
 public:
  virtual ~ImageScorer() = default;
  virtual QualityScore score(const RgbImage& image, const std::set<int>& labels) = 0;
};

class ClassifierScorer : public ImageScorer {
 public:
  ClassifierScorer(LinearHead head, EmbeddingBackend& embedder)
      : head_(std::move(head)), embedder_(embedder) {}
  QualityScore score(const RgbImage& image, const std::set<int>& labels) override {
    return score_image(image, labels, head_, embedder_);
  }

 private:
  LinearHead head_;
  EmbeddingBackend& embedder_;
};

// Binary head file: three little-endian uint64 (e, |C|, format version)
// followed by e*|C| little-endian doubles in row-major order.
inline constexpr std::uint64_t kHeadFormatVersion = 1;
void save_head(const LinearHead& head, const std::filesystem::path& path);
LinearHead load_head(const std::filesystem::path& path);

}  // namespace augagent
