#include "fform/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fform {

using nlohmann::json;

namespace {

constexpr const char* kDetectionFormat = "fform-partitions";

json groups_json(const GroupPartition& p) { return json(p.groups); }

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json score_json(const ThresholdScore& s) {
  return json{{"thr", s.thr},
              {"precision", s.score.precision},
              {"recall", s.score.recall},
              {"f1", s.score.f1},
              {"tp", s.score.tp},
              {"fp", s.score.fp},
              {"fn", s.score.fn}};
}

struct Counts {
  int tp = 0, fp = 0, fn = 0;
  void add(const GroupF1& s) {
    tp += s.tp;
    fp += s.fp;
    fn += s.fn;
  }
};

std::vector<ThresholdScore> to_scores(std::span<const double> thresholds, const std::vector<Counts>& counts) {
  std::vector<ThresholdScore> out;
  for (std::size_t k = 0; k < thresholds.size(); ++k)
    out.push_back({thresholds[k], f1_from_counts(counts[k].tp, counts[k].fp, counts[k].fn)});
  return out;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Population standard deviation.
double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

std::string detections_to_string(std::span<const SceneDetection> scenes) {
  json out;
  out["format"] = kDetectionFormat;
  out["scenes"] = json::array();
  for (const auto& s : scenes) {
    json frames = json::array();
    for (const auto& f : s.frames) {
      frames.push_back(json{{"step", f.step},
                            {"t", f.t},
                            {"person_ids", f.affinity.person_ids},
                            {"affinity", matrix_json(f.affinity.values)},
                            {"groups", groups_json(f.partition)}});
    }
    out["scenes"].push_back(json{{"scene_id", s.scene_id}, {"frames", std::move(frames)}});
  }
  return out.dump(1) + "\n";
}

std::vector<SceneDetection> detections_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("detections: not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kDetectionFormat)
    throw std::runtime_error("detections: expected a file with \"format\": \"fform-partitions\" (written by `fform detect`)");
  std::vector<SceneDetection> out;
  try {
    for (const auto& s : doc.at("scenes")) {
      SceneDetection d;
      d.scene_id = s.at("scene_id").get<std::string>();
      for (const auto& f : s.at("frames")) {
        FrameDetection fd;
        fd.step = f.at("step").get<int>();
        fd.t = f.at("t").get<double>();
        fd.affinity.person_ids = f.at("person_ids").get<std::vector<PersonId>>();
        const auto p = static_cast<Eigen::Index>(fd.affinity.person_ids.size());
        const auto& rows = f.at("affinity");
        if (rows.size() != static_cast<std::size_t>(p))
          throw std::runtime_error("affinity matrix size does not match person_ids");
        fd.affinity.values.resize(p, p);
        for (Eigen::Index r = 0; r < p; ++r) {
          if (rows[r].size() != static_cast<std::size_t>(p))
            throw std::runtime_error("affinity matrix is not square");
          for (Eigen::Index c = 0; c < p; ++c) fd.affinity.values(r, c) = rows[r][c].get<double>();
        }
        fd.affinity.validate();
        fd.partition = GroupPartition(f.at("groups").get<std::vector<std::vector<PersonId>>>());
        fd.partition.validate();
        d.frames.push_back(std::move(fd));
      }
      out.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("detections: malformed record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("detections: invalid content: ") + e.what());
  }
  return out;
}

const GroupF1& EvaluationReport::corpus_score(double thr) const {
  for (const auto& s : corpus)
    if (std::abs(s.thr - thr) < 1e-9) return s.score;
  throw std::out_of_range("evaluation report has no score at thr " + std::to_string(thr));
}

EvaluationReport evaluate(std::span<const SceneDetection> detections, std::span<const SceneSequence> gt,
                          std::span<const double> thresholds) {
  if (thresholds.empty()) throw std::invalid_argument("evaluate: no thresholds given");
  std::vector<GroupMatchConfig> configs;
  for (double thr : thresholds) {
    configs.push_back(GroupMatchConfig{thr});
    configs.back().validate();
  }
  EvaluationReport r;
  r.thresholds.assign(thresholds.begin(), thresholds.end());
  std::vector<Counts> corpus(thresholds.size());
  std::map<int, std::pair<int, std::vector<Counts>>> bins;
  std::vector<double> scores;
  std::vector<int> labels;

  for (const auto& det : detections) {
    auto seq = std::find_if(gt.begin(), gt.end(), [&](const SceneSequence& s) { return s.scene_id == det.scene_id; });
    if (seq == gt.end()) throw std::invalid_argument("evaluate: no ground truth for scene '" + det.scene_id + "'");
    std::vector<GroupPartition> truth;
    for (const auto& f : seq->frames) {
      if (!f.groups) throw std::invalid_argument("evaluate: scene '" + det.scene_id + "' has unlabelled frames");
      truth.push_back(*f.groups);
    }
    const auto dynamics = scene_dynamics(truth);

    SceneEvaluation se;
    se.scene_id = det.scene_id;
    std::vector<Counts> counts(thresholds.size());
    for (const auto& f : det.frames) {
      if (f.step < 0 || f.step >= static_cast<int>(truth.size()) || seq->frames[f.step].t != f.t)
        throw std::invalid_argument("evaluate: scene '" + det.scene_id + "' has no frame at step " +
                                    std::to_string(f.step) + " with t = " + std::to_string(f.t));
      const GroupPartition& ref = truth[f.step];
      auto& bin = bins[dynamics[f.step].total()];
      if (bin.second.empty()) bin.second.resize(thresholds.size());
      ++bin.first;
      for (std::size_t k = 0; k < configs.size(); ++k) {
        const GroupF1 s = group_f1(f.partition, ref, configs[k]);
        counts[k].add(s);
        corpus[k].add(s);
        bin.second[k].add(s);
      }
      const auto& ids = f.affinity.person_ids;
      for (std::size_t a = 0; a < ids.size(); ++a)
        for (std::size_t b = 0; b < ids.size(); ++b) {
          if (a == b) continue;
          scores.push_back(f.affinity.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
          labels.push_back(ref.same_group(ids[a], ids[b]) ? 1 : 0);
        }
      se.dynamics += dynamics[f.step].total();
      ++se.frames;
    }
    se.scores = to_scores(thresholds, counts);
    r.scenes.push_back(std::move(se));
  }
  r.corpus = to_scores(thresholds, corpus);
  for (const auto& [d, bin] : bins) r.by_dynamics.push_back({d, bin.first, to_scores(thresholds, bin.second)});
  r.auc_pairs = static_cast<int>(scores.size());
  const bool both = std::find(labels.begin(), labels.end(), 0) != labels.end() &&
                    std::find(labels.begin(), labels.end(), 1) != labels.end();
  if (both) r.auc = auc(scores, labels);
  return r;
}

std::string evaluation_to_json(const EvaluationReport& r) {
  json out;
  out["thresholds"] = r.thresholds;
  json corpus = json::array();
  for (const auto& s : r.corpus) corpus.push_back(score_json(s));
  out["corpus"] = std::move(corpus);
  out["auc"] = r.auc ? json(*r.auc) : json(nullptr);
  out["auc_pairs"] = r.auc_pairs;
  json bins = json::array();
  for (const auto& b : r.by_dynamics) {
    json scores = json::array();
    for (const auto& s : b.scores) scores.push_back(score_json(s));
    bins.push_back(json{{"d", b.d}, {"frames", b.frames}, {"scores", std::move(scores)}});
  }
  out["by_dynamics"] = std::move(bins);
  json scenes = json::array();
  for (const auto& s : r.scenes) {
    json scores = json::array();
    for (const auto& x : s.scores) scores.push_back(score_json(x));
    scenes.push_back(
        json{{"scene_id", s.scene_id}, {"frames", s.frames}, {"dynamics", s.dynamics}, {"scores", std::move(scores)}});
  }
  out["scenes"] = std::move(scenes);
  return out.dump(1) + "\n";
}

std::string evaluation_to_csv(const EvaluationReport& r) {
  std::ostringstream os;
  os << "scene_id,frames,dynamics";
  for (double thr : r.thresholds) {
    const std::string tag = fixed(thr, 3);
    os << ",tp@" << tag << ",fp@" << tag << ",fn@" << tag << ",f1@" << tag;
  }
  os << "\n";
  auto row = [&](const std::string& id, int frames, int dynamics, const std::vector<ThresholdScore>& scores) {
    os << id << "," << frames << "," << dynamics;
    for (const auto& s : scores)
      os << "," << s.score.tp << "," << s.score.fp << "," << s.score.fn << "," << fixed(s.score.f1, 6);
    os << "\n";
  };
  int frames = 0, dynamics = 0;
  for (const auto& s : r.scenes) {
    row(s.scene_id, s.frames, s.dynamics, s.scores);
    frames += s.frames;
    dynamics += s.dynamics;
  }
  row("corpus", frames, dynamics, r.corpus);
  return os.str();
}

std::string evaluation_to_text(const EvaluationReport& r) {
  std::ostringstream os;
  os << "scenes: " << r.scenes.size() << "\n";
  for (const auto& s : r.corpus)
    os << "F1@" << fixed(s.thr, 3) << ": " << fixed(s.score.f1) << "  (P " << fixed(s.score.precision) << ", R "
       << fixed(s.score.recall) << ", TP " << s.score.tp << ", FP " << s.score.fp << ", FN " << s.score.fn << ")\n";
  os << "AUC: " << (r.auc ? fixed(*r.auc) : std::string("undefined")) << " over " << r.auc_pairs << " pairs\n";
  os << "D     frames";
  for (double thr : r.thresholds) os << "  F1@" << fixed(thr, 3);
  os << "\n";
  for (const auto& b : r.by_dynamics) {
    char head[32];
    std::snprintf(head, sizeof(head), "%-5d %6d", b.d, b.frames);
    os << head;
    for (const auto& s : b.scores) os << "  " << fixed(s.score.f1) << "   ";
    os << "\n";
  }
  return os.str();
}

ForecastReport summarize_forecasts(std::span<const ScenePartitions> scenes) {
  ForecastReport r;
  if (scenes.empty()) return r;
  const GroupMatchConfig majority{kThrMajority}, exact{kThrExact};
  const auto& first = scenes.front().forecast.horizons;
  for (std::size_t k = 0; k < first.size(); ++k) {
    ForecastRow row;
    row.horizon = first[k].horizon;
    std::vector<double> pooled23, pooled1, scene_means23, scene_means1, scene_std23, scene_std1;
    for (const auto& s : scenes) {
      if (s.forecast.horizons.size() != first.size() || s.forecast.horizons[k].horizon != row.horizon)
        throw std::invalid_argument("summarize_forecasts: scenes disagree on the horizon layout");
      const HorizonForecast& h = s.forecast.horizons[k];
      if (h.horizon < 0 || h.horizon >= static_cast<int>(s.gt.size()))
        throw std::invalid_argument("summarize_forecasts: missing ground truth for scene '" + s.scene_id + "'");
      const GroupPartition& ref = s.gt[h.horizon];
      std::vector<double> f23, f1;
      for (const auto& p : h.samples) {
        f23.push_back(group_f1(p, ref, majority).f1);
        f1.push_back(group_f1(p, ref, exact).f1);
      }
      pooled23.insert(pooled23.end(), f23.begin(), f23.end());
      pooled1.insert(pooled1.end(), f1.begin(), f1.end());
      scene_means23.push_back(mean(f23));
      scene_means1.push_back(mean(f1));
      scene_std23.push_back(stddev(f23));
      scene_std1.push_back(stddev(f1));
      row.n_samples = static_cast<int>(h.samples.size());
    }
    row.n_scenes = static_cast<int>(scenes.size());
    row.mean_f1_thr23 = mean(pooled23);
    row.mean_f1_thr1 = mean(pooled1);
    row.std_thr23 = stddev(pooled23);
    row.std_thr1 = stddev(pooled1);
    row.std_samples_thr23 = mean(scene_std23);
    row.std_samples_thr1 = mean(scene_std1);
    row.std_scenes_thr23 = stddev(scene_means23);
    row.std_scenes_thr1 = stddev(scene_means1);
    r.rows.push_back(row);
  }
  return r;
}

std::string forecast_to_json(const ForecastReport& r, std::span<const ScenePartitions> dump) {
  json out;
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back(json{{"horizon", row.horizon},
                        {"N", row.n_samples},
                        {"scenes", row.n_scenes},
                        {"mean_f1_thr23", row.mean_f1_thr23},
                        {"mean_f1_thr1", row.mean_f1_thr1},
                        {"std", json{{"thr23", row.std_thr23}, {"thr1", row.std_thr1}}},
                        {"std_across_samples", json{{"thr23", row.std_samples_thr23}, {"thr1", row.std_samples_thr1}}},
                        {"std_across_scenes", json{{"thr23", row.std_scenes_thr23}, {"thr1", row.std_scenes_thr1}}}});
  }
  out["horizons"] = std::move(rows);
  if (!dump.empty()) {
    json scenes = json::array();
    for (const auto& s : dump) {
      json horizons = json::array();
      for (const auto& h : s.forecast.horizons) {
        json samples = json::array();
        for (const auto& p : h.samples) samples.push_back(groups_json(p));
        horizons.push_back(json{{"horizon", h.horizon}, {"samples", std::move(samples)}});
      }
      scenes.push_back(json{{"scene_id", s.scene_id},
                            {"anchor_step", s.anchor_step},
                            {"persons", s.forecast.persons},
                            {"horizons", std::move(horizons)}});
    }
    out["samples"] = std::move(scenes);
  }
  return out.dump(1) + "\n";
}

std::string forecast_to_text(const ForecastReport& r) {
  std::ostringstream os;
  os << "h    N    scenes  F1@0.667 (std)     F1@1 (std)\n";
  for (const auto& row : r.rows) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-4d %-4d %-7d %.4f (%.4f)    %.4f (%.4f)\n", row.horizon, row.n_samples,
                  row.n_scenes, row.mean_f1_thr23, row.std_thr23, row.mean_f1_thr1, row.std_thr1);
    os << line;
  }
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "': no such file or not readable");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace fform
