#include "fform/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fform {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "fform-affinity-net";
constexpr const char* kGateNames[4] = {"forget", "input", "output", "cell"};

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw CheckpointError("checkpoint: '" + name + "' has the wrong number of rows");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw CheckpointError("checkpoint: '" + name + "' has the wrong number of columns");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index size, const std::string& name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    throw CheckpointError("checkpoint: '" + name + "' has the wrong length");
  Eigen::VectorXd v(size);
  for (Eigen::Index k = 0; k < size; ++k) v(k) = j[k].get<double>();
  return v;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  const int H = p.hidden_size;
  json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  json channels = json::array();
  for (auto name : channel_names()) channels.push_back(std::string(name));
  j["feature_channels"] = channels;
  j["input_size"] = p.input_size;
  j["hidden_size"] = H;
  j["seq_len"] = ckpt.seq_len;
  j["max_people"] = ckpt.max_people;
  j["scaling"] = {{"distance_min", ckpt.scaler.distance_min}, {"distance_max", ckpt.scaler.distance_max}};

  json params;
  for (int g = 0; g < 4; ++g) {
    params[std::string("W_") + kGateNames[g]] = matrix_to_json(p.gate_weights.middleRows(g * H, H));
    json bias = json::array();
    for (int k = 0; k < H; ++k) bias.push_back(p.gate_bias(g * H + k));
    params[std::string("b_") + kGateNames[g]] = bias;
  }
  json wm = json::array();
  for (int k = 0; k < H; ++k) wm.push_back(p.head_weights(k));
  params["W_m"] = wm;
  params["b_m"] = p.head_bias;
  params["lambda_raw"] = p.lambda_raw;
  j["params"] = params;

  const TrainConfig& tc = ckpt.train_config;
  j["training"] = {{"learning_rate", tc.learning_rate}, {"epochs", tc.epochs},       {"batch_size", tc.batch_size},
                   {"seed", tc.seed},                   {"clip_norm", tc.clip_norm}, {"windows_per_epoch", tc.windows_per_epoch},
                   {"best_epoch", ckpt.best_epoch}};
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint: not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != kFormat) throw CheckpointError("checkpoint: unknown format tag");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw CheckpointError("checkpoint: unsupported version " + j.at("version").dump());

    const json& channels = j.at("feature_channels");
    const auto& names = channel_names();
    bool same = channels.is_array() && channels.size() == names.size();
    for (std::size_t k = 0; same && k < names.size(); ++k) same = channels[k].get<std::string>() == names[k];
    if (!same || j.at("input_size").get<int>() != kFeatureSize)
      throw CheckpointError("checkpoint: feature layout " + channels.dump() +
                            " does not match this build's layout; retrain the model");

    Checkpoint ckpt;
    const int H = j.at("hidden_size").get<int>();
    if (H <= 0) throw CheckpointError("checkpoint: hidden_size must be positive");
    ckpt.params = ModelParams::zeros(kFeatureSize, H);
    ckpt.seq_len = j.at("seq_len").get<int>();
    ckpt.max_people = j.at("max_people").get<int>();
    ckpt.scaler.distance_min = j.at("scaling").at("distance_min").get<double>();
    ckpt.scaler.distance_max = j.at("scaling").at("distance_max").get<double>();

    const json& params = j.at("params");
    const Eigen::Index cols = ckpt.params.concat_size();
    for (int g = 0; g < 4; ++g) {
      const std::string w = std::string("W_") + kGateNames[g];
      const std::string b = std::string("b_") + kGateNames[g];
      ckpt.params.gate_weights.middleRows(g * H, H) = matrix_from_json(params.at(w), H, cols, w);
      ckpt.params.gate_bias.segment(g * H, H) = vector_from_json(params.at(b), H, b);
    }
    ckpt.params.head_weights = vector_from_json(params.at("W_m"), H, "W_m").transpose();
    ckpt.params.head_bias = params.at("b_m").get<double>();
    ckpt.params.lambda_raw = params.at("lambda_raw").get<double>();

    const json& tr = j.at("training");
    ckpt.train_config.hidden_size = H;
    ckpt.train_config.seq_len = ckpt.seq_len;
    ckpt.train_config.learning_rate = tr.at("learning_rate").get<double>();
    ckpt.train_config.epochs = tr.at("epochs").get<int>();
    ckpt.train_config.batch_size = tr.at("batch_size").get<int>();
    ckpt.train_config.seed = tr.at("seed").get<std::uint64_t>();
    ckpt.train_config.clip_norm = tr.at("clip_norm").get<double>();
    ckpt.train_config.windows_per_epoch = tr.at("windows_per_epoch").get<std::size_t>();
    ckpt.best_epoch = tr.at("best_epoch").get<int>();
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  out << checkpoint_to_string(ckpt);
  if (!out) throw CheckpointError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace fform
