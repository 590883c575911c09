#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mscl/interval.hpp"
#include "mscl/linalg.hpp"

namespace mscl {

// One video/query pair. The ground-truth interval is only ever read by
// evaluation code.
struct FeatureSample {
  std::string sample_id;
  Mat video_features;  // n x D_v
  Mat query_features;  // m x D_q
  double frame_duration = 1.0;
  std::optional<TimeInterval> ground_truth;

  int num_frames() const { return static_cast<int>(video_features.rows()); }
  int num_words() const { return static_cast<int>(query_features.rows()); }

  // Throws DataError naming the sample when an invariant is broken.
  void validate() const;
};

struct SyntheticSpec {
  int num_samples = 200;
  int n = 64;
  int m = 8;
  int video_dim = 32;
  int query_dim = 32;
  int min_seg_frames = 8;
  int max_seg_frames = 24;
  double noise_std = 0.5;
  double frame_duration = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Every sample carries one contiguous foreground segment. The prototype is a
// unit vector in query space; foreground frames are its image under a fixed
// dataset-wide linear map plus N(0, noise_std^2) noise, background frames are
// pure N(0, noise_std^2) noise, and each query word is prototype plus noise.
// Values are rounded to float precision so blobs round-trip exactly.
std::vector<FeatureSample> generate_synthetic(const SyntheticSpec& spec);

// The query-space -> video-space map used by generate_synthetic: identity
// when the dimensions agree, a seeded Gaussian matrix otherwise.
Mat synthetic_feature_map(const SyntheticSpec& spec);

std::vector<FeatureSample> load_manifest(const std::filesystem::path& path);

// Writes one blob pair per sample under blob_dir and a manifest whose blob
// paths are relative to the manifest's directory.
void save_manifest(std::span<const FeatureSample> samples,
                   const std::filesystem::path& manifest_path,
                   const std::filesystem::path& blob_dir);

void write_blob(const std::filesystem::path& path, const Mat& m);
Mat read_blob(const std::filesystem::path& path, int rows, int cols);

// K samples zero-padded to the batch maxima. Masks are prefix-true rows.
struct Batch {
  std::vector<std::string> sample_ids;
  std::vector<Mat> video;  // each n_max x D_v
  std::vector<Mat> query;  // each m_max x D_q
  std::vector<double> frame_duration;
  std::vector<std::optional<TimeInterval>> ground_truth;
  BoolMat video_pad_mask;  // K x n_max, true = real frame
  BoolMat query_pad_mask;  // K x m_max

  int size() const { return static_cast<int>(video.size()); }
  int max_frames() const { return static_cast<int>(video_pad_mask.cols()); }
  int max_words() const { return static_cast<int>(query_pad_mask.cols()); }
  int frames(int k) const { return static_cast<int>(video_pad_mask.row(k).count()); }
  int words(int k) const { return static_cast<int>(query_pad_mask.row(k).count()); }
};

Batch make_batch(std::span<const FeatureSample> samples, std::span<const std::size_t> indices);
std::vector<Batch> batchify(std::span<const FeatureSample> samples, int batch_size);
// Batches in the given sample order.
std::vector<Batch> batchify(std::span<const FeatureSample> samples,
                            std::span<const std::size_t> order, int batch_size);

}  // namespace mscl
