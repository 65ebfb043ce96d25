#include "augagent/scorer.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "augagent/codec.hpp"
#include "augagent/parallel.hpp"

namespace augagent {

static_assert(std::endian::native == std::endian::little,
              "head files are written in host byte order");

int patch_count(int height, int width, int patch_size) {
  if (patch_size <= 0 || height <= 0 || width <= 0 || height % patch_size != 0 ||
      width % patch_size != 0) {
    throw DataError("image sides must be positive multiples of the patch size");
  }
  return (height / patch_size) * (width / patch_size);
}

PatchEmbeddings MockEmbedder::embed(const RgbImage& image) {
  const int rows_of_patches = image.height() / kPatchSize;
  const int cols_of_patches = image.width() / kPatchSize;
  const int s = patch_count(image.height(), image.width(), kPatchSize);
  PatchEmbeddings features = PatchEmbeddings::Zero(s, kDim);

  Eigen::MatrixXd luma(image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      luma(y, x) = 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) +
                   0.114 * image.at(x, y, 2);
    }
  }

  constexpr double n = kPatchSize * kPatchSize;
  constexpr int half = kPatchSize / 2;
  for (int py = 0; py < rows_of_patches; ++py) {
    for (int px = 0; px < cols_of_patches; ++px) {
      auto row = features.row(py * cols_of_patches + px);
      const auto patch = luma.block(py * kPatchSize, px * kPatchSize, kPatchSize, kPatchSize);
      for (Eigen::Index i = 0; i < patch.size(); ++i) {
        const double v = patch(i % kPatchSize, i / kPatchSize);
        row[std::min(7, static_cast<int>(v / 32.0))] += 1.0 / n;
      }
      const double mean = patch.mean();
      row[8] = mean / 255.0;
      row[9] = std::sqrt((patch.array() - mean).square().mean()) / 128.0;
      const auto dx = (patch.rightCols(kPatchSize - 1) - patch.leftCols(kPatchSize - 1)).cwiseAbs();
      const auto dy = (patch.bottomRows(kPatchSize - 1) - patch.topRows(kPatchSize - 1)).cwiseAbs();
      row[10] = dx.mean() / 255.0;
      row[11] = dy.mean() / 255.0;
      row[12] = (dx.array() > 64.0).cast<double>().mean();
      row[13] = (patch.topRows(half).mean() - patch.bottomRows(half).mean()) / 255.0;
      row[14] = (patch.leftCols(half).mean() - patch.rightCols(half).mean()) / 255.0;
      row[15] = 1.0;
    }
  }
  return features;
}

LinearHead initial_head(Eigen::Index embedding_dim, Eigen::Index num_classes,
                        const TrainOptions& options) {
  std::mt19937_64 rng(options.seed);
  LinearHead head{Eigen::MatrixXd(embedding_dim, num_classes)};
  for (Eigen::Index r = 0; r < embedding_dim; ++r) {
    for (Eigen::Index c = 0; c < num_classes; ++c) {
      head.weights(r, c) = options.init_scale * (2.0 * unit_interval(rng()) - 1.0);
    }
  }
  return head;
}

TrainResult train_head(std::span<const TrainingSample> samples, Eigen::Index num_classes,
                       const TrainOptions& options) {
  if (samples.empty()) throw DataError("no training samples");
  if (options.epochs < 0 || options.batch_size < 1 || !(options.learning_rate > 0.0)) {
    throw ConfigError("invalid training options");
  }
  const Eigen::Index dim = samples.front().features.cols();
  for (const auto& sample : samples) {
    if (sample.features.cols() != dim || sample.targets.size() != num_classes) {
      throw DataError("training samples have inconsistent shapes");
    }
  }

  TrainResult result{initial_head(dim, num_classes, options), {}};
  Eigen::MatrixXd& weights = result.head.weights;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Eigen::MatrixXd batch_grad(dim, num_classes);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    // Fisher-Yates with a per-epoch stream; std::shuffle's output is
    // implementation-defined.
    std::mt19937_64 rng(splitmix64(options.seed ^ static_cast<std::uint64_t>(epoch + 1)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      batch_grad.setZero();
      for (std::size_t i = start; i < end; ++i) {
        const auto& sample = samples[order[i]];
        auto lg = mce_loss_and_gradient(sample.targets, sample.features, weights);
        if (!std::isfinite(lg.loss)) {
          throw DataError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                          ", sample " + std::to_string(order[i]) +
                          "; max |W| = " + std::to_string(weights.cwiseAbs().maxCoeff()));
        }
        epoch_total += lg.loss;
        batch_grad += lg.gradient;
      }
      weights -= (options.learning_rate / static_cast<double>(end - start)) * batch_grad;
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(samples.size()));
  }
  return result;
}

TrainResult train_head(const DatasetManifest& manifest, EmbeddingBackend& embedder,
                       const TrainOptions& options, int jobs) {
  std::vector<const ImageRecord*> originals;
  for (const auto& record : manifest.records) {
    if (record.provenance == Provenance::original) originals.push_back(&record);
  }
  std::vector<TrainingSample> samples(originals.size());
  const auto classes = static_cast<Eigen::Index>(manifest.vocabulary.size());
  parallel_for(originals.size(), jobs, [&](std::size_t i) {
    const RgbImage image = resize_bilinear(read_png_rgb(originals[i]->image_path),
                                           kScorerImageSize, kScorerImageSize);
    samples[i].features = embedder.embed(image);
    samples[i].targets = Eigen::VectorXd::Zero(classes);
    for (int id : originals[i]->labels) samples[i].targets[id] = 1.0;
  });
  return train_head(samples, classes, options);
}

QualityScore score_image(const RgbImage& image, const std::set<int>& labels,
                         const LinearHead& head, EmbeddingBackend& embedder) {
  if (labels.empty()) throw DataError("cannot score an image without labels");
  for (int id : labels) {
    if (id < 0 || id >= head.num_classes()) throw DataError("label outside the head's classes");
  }
  const PatchEmbeddings features =
      embedder.embed(resize_bilinear(image, kScorerImageSize, kScorerImageSize));
  if (features.rows() != kPatchGrid * kPatchGrid || features.cols() != head.embedding_dim()) {
    throw BackendError("embedder returned shape [" + std::to_string(features.rows()) + ", " +
                       std::to_string(features.cols()) + "]");
  }
  auto pooled = image_scores(patch_scores(features, head.weights));
  QualityScore out{std::move(pooled.per_class), 1.0, std::move(pooled.argmax_patch)};
  for (int id : labels) out.target_score = std::min(out.target_score, out.per_class[id]);
  return out;
}

void save_head(const LinearHead& head, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  const std::uint64_t header[3] = {static_cast<std::uint64_t>(head.embedding_dim()),
                                   static_cast<std::uint64_t>(head.num_classes()),
                                   kHeadFormatVersion};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major =
      head.weights;
  out.write(reinterpret_cast<const char*>(row_major.data()),
            static_cast<std::streamsize>(row_major.size() * sizeof(double)));
  if (!out) throw DataError("cannot write head " + path.string());
}

LinearHead load_head(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open head " + path.string());
  std::uint64_t header[3] = {};
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || header[2] != kHeadFormatVersion || header[0] == 0 || header[1] == 0 ||
      header[0] > (1u << 20) || header[1] > (1u << 20)) {
    throw DataError("bad head header in " + path.string());
  }
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major(
      static_cast<Eigen::Index>(header[0]), static_cast<Eigen::Index>(header[1]));
  in.read(reinterpret_cast<char*>(row_major.data()),
          static_cast<std::streamsize>(row_major.size() * sizeof(double)));
  if (!in || in.peek() != std::char_traits<char>::eof()) {
    throw DataError("truncated or oversized head file " + path.string());
  }
  if (!row_major.allFinite()) throw DataError("non-finite weights in " + path.string());
  return {row_major};
}

}  // namespace augagent
