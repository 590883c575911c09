#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>
#include <zlib.h>

#include "mscl/errors.hpp"
#include "mscl/training.hpp"

namespace mscl {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'C', 'L', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void put_tensor(const Mat& m) {
    put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
    const auto* p = reinterpret_cast<const char*>(m.data());
    bytes_.insert(bytes_.end(), p, p + sizeof(double) * static_cast<std::size_t>(m.size()));
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : data_(data), size_(size) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }
  void get_tensor(Mat& m, const std::string& name) {
    const auto rows = get<std::uint32_t>();
    const auto cols = get<std::uint32_t>();
    if (rows != m.rows() || cols != m.cols()) {
      throw CheckpointError("checkpoint tensor " + name + " has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", model expects " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
    }
    const std::size_t n = sizeof(double) * static_cast<std::size_t>(m.size());
    need(n);
    std::memcpy(m.data(), data_ + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw CheckpointError("corrupt checkpoint: truncated payload");
  }
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

nlohmann::json model_to_json(const ModelConfig& c) {
  return {{"video_dim", c.video_dim},   {"query_dim", c.query_dim},     {"latent_dim", c.latent_dim},
          {"num_conv_layers", c.num_conv_layers}, {"conv_kernel", c.conv_kernel}, {"num_heads", c.num_heads},
          {"ffn_hidden", c.ffn_hidden}, {"head_hidden", c.head_hidden},
          {"activation", std::string(to_string(c.activation))}, {"param_init_seed", c.param_init_seed}};
}

ModelConfig model_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.video_dim = j.at("video_dim");
  c.query_dim = j.at("query_dim");
  c.latent_dim = j.at("latent_dim");
  c.num_conv_layers = j.at("num_conv_layers");
  c.conv_kernel = j.at("conv_kernel");
  c.num_heads = j.at("num_heads");
  c.ffn_hidden = j.at("ffn_hidden");
  c.head_hidden = j.at("head_hidden");
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.param_init_seed = j.at("param_init_seed");
  return c;
}

nlohmann::json train_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr0", c.lr0},
          {"lambda_fra", c.lambda_fra},
          {"lambda_seg", c.lambda_seg},
          {"warmup_epochs", c.warmup_epochs},
          {"initial_lower", c.scheduler.initial_lower},
          {"delta", c.scheduler.delta},
          {"cycle_epochs", c.scheduler.cycle_epochs},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon}};
}

TrainConfig train_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.lr0 = j.at("lr0");
  c.lambda_fra = j.at("lambda_fra");
  c.lambda_seg = j.at("lambda_seg");
  c.warmup_epochs = j.at("warmup_epochs");
  c.scheduler.warmup_epochs = c.warmup_epochs;
  c.scheduler.initial_lower = j.at("initial_lower");
  c.scheduler.delta = j.at("delta");
  c.scheduler.cycle_epochs = j.at("cycle_epochs");
  c.seed = j.at("seed");
  c.checkpoint_every = j.at("checkpoint_every");
  c.adam.beta1 = j.at("beta1");
  c.adam.beta2 = j.at("beta2");
  c.adam.epsilon = j.at("epsilon");
  return c;
}

nlohmann::json record_to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"lr", r.lr},
          {"score_loss", r.score_loss},
          {"frame_loss", r.frame_loss},
          {"segment_loss", r.segment_loss},
          {"total", r.total},
          {"b_l", r.lower_bound},
          {"b_l_clamped", r.lower_bound_clamped},
          {"b_u", r.upper_bound},
          {"frame_skipped", r.frame_skipped},
          {"segment_skipped", r.segment_skipped}};
}

EpochRecord record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch");
  r.lr = j.at("lr");
  r.score_loss = j.at("score_loss");
  r.frame_loss = j.at("frame_loss");
  r.segment_loss = j.at("segment_loss");
  r.total = j.at("total");
  r.lower_bound = j.at("b_l");
  r.lower_bound_clamped = j.at("b_l_clamped");
  r.upper_bound = j.at("b_u");
  r.frame_skipped = j.at("frame_skipped");
  r.segment_skipped = j.at("segment_skipped");
  return r;
}

}  // namespace

void save_checkpoint(const TrainingState& state, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["model"] = model_to_json(state.model);
  meta["train"] = train_to_json(state.train);
  meta["next_epoch"] = state.next_epoch;
  meta["adam_step"] = state.adam.step;
  meta["log"] = nlohmann::json::array();
  for (const auto& r : state.log.records) meta["log"].push_back(record_to_json(r));
  const std::string meta_text = meta.dump();

  Writer payload;
  payload.put<std::uint64_t>(meta_text.size());
  payload.put_bytes(meta_text);
  for (const ModelParams* p : {&state.params, &state.adam.first, &state.adam.second}) {
    for_each_tensor(*p, [&](const std::string&, const Mat& t) { payload.put_tensor(t); });
  }
  const auto& body = payload.bytes();
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));

  Writer file;
  for (char c : kMagic) file.put(c);
  file.put<std::uint32_t>(kCheckpointVersion);
  file.put<std::uint64_t>(body.size());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(file.bytes().data(), static_cast<std::streamsize>(file.bytes().size()));
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    out.write(reinterpret_cast<const char*>(&crc), sizeof crc);
    if (!out) throw CheckpointError("short write on checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainingState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t header = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < header + sizeof(std::uint32_t) || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": bad header");
  }
  Reader head(bytes.data(), header);
  head.get_bytes(sizeof kMagic);
  const auto version = head.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint " + path.string() + " has version " + std::to_string(version) +
                          ", expected " + std::to_string(kCheckpointVersion));
  }
  const auto body_size = head.get<std::uint64_t>();
  if (bytes.size() != header + body_size + sizeof(std::uint32_t)) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": size mismatch");
  }
  const char* body = bytes.data() + header;
  std::uint32_t stored;
  std::memcpy(&stored, body + body_size, sizeof stored);
  const auto actual = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body), static_cast<uInt>(body_size)));
  if (stored != actual) throw CheckpointError("corrupt checkpoint " + path.string() + ": checksum mismatch");

  Reader r(body, body_size);
  TrainingState st;
  try {
    const auto meta_len = r.get<std::uint64_t>();
    const auto meta = nlohmann::json::parse(r.get_bytes(meta_len));
    st.model = model_from_json(meta.at("model"));
    st.train = train_from_json(meta.at("train"));
    st.next_epoch = meta.at("next_epoch");
    st.adam.step = meta.at("adam_step");
    for (const auto& rec : meta.at("log")) st.log.records.push_back(record_from_json(rec));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt checkpoint metadata: " + std::string(e.what()));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError("corrupt checkpoint metadata: " + std::string(e.what()));
  }
  st.params = init_params(st.model);
  st.adam.first = zeros_like(st.params);
  st.adam.second = zeros_like(st.params);
  for (ModelParams* p : {&st.params, &st.adam.first, &st.adam.second}) {
    for_each_tensor(*p, [&](const std::string& name, Mat& t) { r.get_tensor(t, name); });
  }
  if (!r.done()) throw CheckpointError("corrupt checkpoint: trailing bytes");
  return st;
}

}  // namespace mscl
