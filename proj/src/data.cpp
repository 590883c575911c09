#include "mscl/data.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mscl/errors.hpp"

namespace mscl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream 0 is reserved for the dataset-wide feature map.
std::mt19937_64 sub_stream(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

double to_float_precision(double x) { return static_cast<double>(static_cast<float>(x)); }

std::uint32_t swap_bytes(std::uint32_t v) {
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace

bool TimeInterval::valid() const {
  return std::isfinite(start) && std::isfinite(end) && start >= 0.0 && start < end;
}

void FeatureSample::validate() const {
  const auto fail = [&](const std::string& what) {
    throw DataError("sample '" + sample_id + "': " + what);
  };
  if (video_features.rows() < 1 || video_features.cols() < 1) fail("empty video features");
  if (query_features.rows() < 1 || query_features.cols() < 1) fail("empty query features");
  if (!video_features.allFinite()) fail("non-finite video feature");
  if (!query_features.allFinite()) fail("non-finite query feature");
  if (!(frame_duration > 0.0) || !std::isfinite(frame_duration)) fail("frame_duration must be > 0");
  if (ground_truth) {
    const double span = num_frames() * frame_duration;
    if (!(ground_truth->start >= 0.0 && ground_truth->start < ground_truth->end &&
          ground_truth->end <= span + 1e-9)) {
      fail("ground truth outside [0, n * frame_duration]");
    }
  }
}

void SyntheticSpec::validate() const {
  const auto fail = [](const std::string& what) { throw DataError("synthetic spec: " + what); };
  if (num_samples < 1) fail("num_samples must be positive");
  if (n < 1 || m < 1) fail("n and m must be positive");
  if (video_dim < 1 || query_dim < 1) fail("feature dimensions must be positive");
  if (!(1 <= min_seg_frames && min_seg_frames <= max_seg_frames && max_seg_frames <= n)) {
    fail("need 1 <= min_seg_frames <= max_seg_frames <= n");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) fail("noise_std must be >= 0");
  if (!(frame_duration > 0.0)) fail("frame_duration must be > 0");
}

Mat synthetic_feature_map(const SyntheticSpec& spec) {
  if (spec.video_dim == spec.query_dim) return Mat::Identity(spec.query_dim, spec.video_dim);
  auto rng = sub_stream(spec.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(spec.video_dim)));
  Mat map(spec.query_dim, spec.video_dim);
  for (Eigen::Index i = 0; i < map.rows(); ++i)
    for (Eigen::Index j = 0; j < map.cols(); ++j) map(i, j) = normal(rng);
  return map;
}

std::vector<FeatureSample> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Mat map = synthetic_feature_map(spec);
  std::vector<FeatureSample> out(spec.num_samples);
  for (int idx = 0; idx < spec.num_samples; ++idx) {
    auto rng = sub_stream(spec.seed, static_cast<std::uint64_t>(idx) + 1);
    std::normal_distribution<double> unit(0.0, 1.0);
    const auto noise = [&]() { return spec.noise_std * unit(rng); };

    Vec prototype(spec.query_dim);
    for (auto& x : prototype) x = unit(rng);
    prototype.normalize();
    const Eigen::RowVectorXd mapped = prototype.transpose() * map;

    std::uniform_int_distribution<int> len_dist(spec.min_seg_frames, spec.max_seg_frames);
    const int len = len_dist(rng);
    std::uniform_int_distribution<int> start_dist(0, spec.n - len);
    const int start = start_dist(rng);

    FeatureSample& s = out[idx];
    s.sample_id = "synth_" + std::to_string(idx);
    s.frame_duration = spec.frame_duration;
    s.video_features.resize(spec.n, spec.video_dim);
    for (int t = 0; t < spec.n; ++t) {
      const bool fg = t >= start && t < start + len;
      for (int d = 0; d < spec.video_dim; ++d) {
        s.video_features(t, d) = to_float_precision((fg ? mapped(d) : 0.0) + noise());
      }
    }
    s.query_features.resize(spec.m, spec.query_dim);
    for (int w = 0; w < spec.m; ++w)
      for (int d = 0; d < spec.query_dim; ++d)
        s.query_features(w, d) = to_float_precision(prototype(d) + noise());
    s.ground_truth = TimeInterval{start * spec.frame_duration, (start + len) * spec.frame_duration, 0.0};
  }
  return out;
}

void write_blob(const std::filesystem::path& path, const Mat& m) {
  std::vector<std::uint32_t> words;
  words.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c)));
      if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
      words.push_back(bits);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write blob " + path.string());
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (!out) throw DataError("short write on blob " + path.string());
}

Mat read_blob(const std::filesystem::path& path, int rows, int cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing blob " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected = static_cast<std::size_t>(rows) * cols * sizeof(float);
  if (bytes.size() != expected) {
    throw DataError("shape mismatch: blob " + path.string() + " holds " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(rows) + "x" + std::to_string(cols) + " floats");
  }
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + (static_cast<std::size_t>(r) * cols + c) * 4, 4);
      if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
      m(r, c) = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return m;
}

std::vector<FeatureSample> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<FeatureSample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    FeatureSample s;
    try {
      s.sample_id = rec.at("sample_id").get<std::string>();
      const int n = rec.at("n").get<int>();
      const int dv = rec.at("D_v").get<int>();
      const int m = rec.at("m").get<int>();
      const int dq = rec.at("D_q").get<int>();
      if (n < 1 || dv < 1 || m < 1 || dq < 1) throw DataError("non-positive shape");
      s.frame_duration = rec.at("frame_duration").get<double>();
      s.video_features = read_blob(base / rec.at("video_blob_path").get<std::string>(), n, dv);
      s.query_features = read_blob(base / rec.at("query_blob_path").get<std::string>(), m, dq);
      const bool has_start = rec.contains("gt_start") && !rec["gt_start"].is_null();
      const bool has_end = rec.contains("gt_end") && !rec["gt_end"].is_null();
      if (has_start != has_end) throw DataError("gt_start and gt_end must appear together");
      if (has_start) {
        s.ground_truth = TimeInterval{rec["gt_start"].get<double>(), rec["gt_end"].get<double>(), 0.0};
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("sample '" + s.sample_id + "' (" + path.string() + ":" + std::to_string(line_no) +
                      "): " + e.what());
    } catch (const DataError& e) {
      throw DataError("sample '" + s.sample_id + "': " + e.what());
    }
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

void save_manifest(std::span<const FeatureSample> samples, const std::filesystem::path& manifest_path,
                   const std::filesystem::path& blob_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(blob_dir);
  if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
  const auto base = manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + manifest_path.string());
  for (const auto& s : samples) {
    s.validate();
    const auto vpath = blob_dir / (s.sample_id + ".video.f32");
    const auto qpath = blob_dir / (s.sample_id + ".query.f32");
    write_blob(vpath, s.video_features);
    write_blob(qpath, s.query_features);
    nlohmann::ordered_json rec;
    rec["sample_id"] = s.sample_id;
    rec["video_blob_path"] = fs::relative(vpath, base).generic_string();
    rec["n"] = s.num_frames();
    rec["D_v"] = s.video_features.cols();
    rec["query_blob_path"] = fs::relative(qpath, base).generic_string();
    rec["m"] = s.num_words();
    rec["D_q"] = s.query_features.cols();
    rec["frame_duration"] = s.frame_duration;
    if (s.ground_truth) {
      rec["gt_start"] = s.ground_truth->start;
      rec["gt_end"] = s.ground_truth->end;
    }
    out << rec.dump() << '\n';
  }
}

Batch make_batch(std::span<const FeatureSample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("cannot build an empty batch");
  int n_max = 0, m_max = 0;
  for (auto i : indices) {
    n_max = std::max(n_max, samples[i].num_frames());
    m_max = std::max(m_max, samples[i].num_words());
  }
  const int K = static_cast<int>(indices.size());
  Batch b;
  b.video_pad_mask = BoolMat::Constant(K, n_max, false);
  b.query_pad_mask = BoolMat::Constant(K, m_max, false);
  for (int k = 0; k < K; ++k) {
    const FeatureSample& s = samples[indices[k]];
    b.sample_ids.push_back(s.sample_id);
    b.frame_duration.push_back(s.frame_duration);
    b.ground_truth.push_back(s.ground_truth);
    Mat v = Mat::Zero(n_max, s.video_features.cols());
    v.topRows(s.num_frames()) = s.video_features;
    Mat q = Mat::Zero(m_max, s.query_features.cols());
    q.topRows(s.num_words()) = s.query_features;
    b.video.push_back(std::move(v));
    b.query.push_back(std::move(q));
    b.video_pad_mask.row(k).head(s.num_frames()).setConstant(true);
    b.query_pad_mask.row(k).head(s.num_words()).setConstant(true);
  }
  return b;
}

std::vector<Batch> batchify(std::span<const FeatureSample> samples, std::span<const std::size_t> order,
                            int batch_size) {
  if (batch_size < 1) throw DataError("batch size must be >= 1");
  if (order.empty()) throw DataError("cannot batch an empty sample list");
  std::vector<Batch> out;
  for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(batch_size)) {
    const std::size_t len = std::min(order.size() - pos, static_cast<std::size_t>(batch_size));
    out.push_back(make_batch(samples, order.subspan(pos, len)));
  }
  return out;
}

std::vector<Batch> batchify(std::span<const FeatureSample> samples, int batch_size) {
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return batchify(samples, order, batch_size);
}

}  // namespace mscl
