#include "fform/cli.hpp"

#include <cstdio>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fform/affinity_net.hpp"
#include "fform/checkpoint.hpp"
#include "fform/dominant_set.hpp"
#include "fform/evaluation.hpp"
#include "fform/forecasting.hpp"
#include "fform/pipeline.hpp"
#include "fform/report.hpp"
#include "fform/scene.hpp"
#include "fform/synth.hpp"

namespace fform::cli {

namespace {

constexpr double kGradTolerance = 1e-5;

// JSON config files. Top-level scalars apply to the selected subcommand; an
// object keyed by a subcommand name applies only to that subcommand; objects
// for other subcommands are ignored. Keys the subcommand lacks are ignored.
class JsonConfig : public CLI::Config {
 public:
  JsonConfig(const CLI::App* app, std::set<std::string> all_sections)
      : app_(app), all_sections_(std::move(all_sections)) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json doc;
    try {
      input >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConfigError("config file must hold a JSON object");
    const auto selected = app_->get_subcommands();
    if (selected.empty()) return {};
    const std::string section = selected.front()->get_name();
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      if (value.is_object()) {
        if (!all_sections_.count(key)) throw CLI::ConfigError("config: unknown section '" + key + "'");
        if (key != section) continue;
        for (const auto& [k, v] : value.items()) items.push_back(item(section, k, v));
      } else {
        items.push_back(item(section, key, value));
      }
    }
    return items;
  }

 private:
  static CLI::ConfigItem item(const std::string& section, const std::string& key, const nlohmann::json& value) {
    CLI::ConfigItem it;
    it.parents = {section};
    it.name = key;
    auto text = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& v : value) it.inputs.push_back(text(v));
    } else {
      it.inputs.push_back(text(value));
    }
    return it;
  }

  const CLI::App* app_;
  std::set<std::string> all_sections_;
};

struct DsFlags {
  double threshold = DSConfig{}.affinity_threshold;
  std::string symmetrize = std::string(to_string(DSConfig{}.strategy));

  DSConfig config() const {
    DSConfig c;
    c.affinity_threshold = threshold;
    c.strategy = *parse_symmetrization(symmetrize);
    c.validate();
    return c;
  }
};

void add_ds_flags(CLI::App* app, DsFlags& f) {
  app->add_option("--ds-threshold", f.threshold, "Minimum mutual affinity for a dominant set to count as a group")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app->add_option("--symmetrize", f.symmetrize, "Affinity symmetrization before clustering")
      ->check(CLI::IsMember({"raw", "average", "minimum", "maximum"}))
      ->capture_default_str();
}

Split split_from(const std::string& name) { return *parse_split(name); }

void require_labels(const std::vector<SceneSequence>& scenes, const std::string& what) {
  for (const auto& s : scenes)
    for (const auto& f : s.frames)
      if (!f.groups) throw std::runtime_error(what + " needs ground-truth groups, scene '" + s.scene_id + "' has none");
}

struct SynthArgs {
  SynthConfig config;
  std::string out;
  int subsample_factor = 1;
};

int do_synth(const SynthArgs& a, std::ostream& out) {
  auto scenes = generate(a.config);
  if (a.subsample_factor > 1)
    for (auto& s : scenes) s = subsample(s, a.subsample_factor);
  save_scene_sequences(scenes, a.out);
  std::size_t frames = 0;
  for (const auto& s : scenes) frames += s.steps();
  out << "wrote " << scenes.size() << " scenes (" << frames << " frames) to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, checkpoint, log;
  TrainConfig config;
  int stride = 1;
};

int do_train(TrainArgs a, std::ostream& out) {
  const auto scenes = load_scene_sequences(a.data);
  if (scenes.empty()) throw std::runtime_error("no scenes in '" + a.data + "'");
  require_labels(scenes, "train");
  const FeatureScaler scaler = fit_training_scaler(scenes);
  const auto train_set = make_split_windows(scenes, a.config.seq_len, scaler, Split::train, {}, a.stride);
  const auto val_set = make_split_windows(scenes, a.config.seq_len, scaler, Split::val, {}, a.stride);
  if (train_set.empty())
    throw std::runtime_error("no training windows: scenes are shorter than the sequence length " +
                             std::to_string(a.config.seq_len));
  out << "training on " << train_set.size() << " windows, validating on " << val_set.size() << "\n";

  std::ostringstream log;
  log << "epoch,train_loss,val_loss\n";
  const TrainResult r = train(train_set, val_set, a.config, [&](const EpochLog& e) {
    char line[128];
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss);
    log << line;
    std::snprintf(line, sizeof(line), "epoch %3d  train %.6f  val %.6f\n", e.epoch, e.train_loss, e.val_loss);
    out << line;
  });

  Checkpoint ckpt;
  ckpt.params = r.params;
  ckpt.scaler = scaler;
  ckpt.seq_len = a.config.seq_len;
  int max_people = 0;
  for (const auto& s : scenes) max_people = std::max(max_people, s.n);
  ckpt.max_people = max_people;
  ckpt.train_config = a.config;
  ckpt.best_epoch = r.best_epoch;
  save_checkpoint(ckpt, a.checkpoint);
  const std::string log_path = a.log.empty() ? a.checkpoint + ".log.csv" : a.log;
  write_text_file(log_path, log.str());
  out << "best epoch " << r.best_epoch << "; wrote " << a.checkpoint << " and " << log_path << "\n";
  return 0;
}

struct DetectArgs {
  std::string data, checkpoint, out, split = "test";
  DsFlags ds;
};

int do_detect(const DetectArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const auto scenes = load_scene_sequences(a.data);
  const DSConfig ds = a.ds.config();
  std::vector<SceneDetection> detections;
  std::size_t frames = 0;
  for (const auto& s : scenes) {
    const auto [first, last] = end_step_range(static_cast<int>(s.steps()), ckpt.seq_len, split_from(a.split));
    detections.push_back(detect_scene(ckpt.params, s, ckpt.seq_len, ckpt.scaler, ds, first, last));
    frames += detections.back().frames.size();
  }
  write_text_file(a.out, detections_to_string(detections));
  out << "detected groups on " << frames << " frames of " << scenes.size() << " scenes; wrote " << a.out << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string data, detections, out, csv;
  std::vector<double> thr = {kThrMajority, kThrExact};
};

int do_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto scenes = load_scene_sequences(a.data);
  require_labels(scenes, "evaluate");
  const auto detections = detections_from_string(read_text_file(a.detections));
  std::vector<double> thr = a.thr;
  for (double& t : thr)
    if (std::abs(t - kThrMajority) < 1e-3) t = kThrMajority;  // 0.667 on the command line means 2/3
  const EvaluationReport r = evaluate(detections, scenes, thr);
  out << evaluation_to_text(r);
  if (!a.out.empty()) write_text_file(a.out, evaluation_to_json(r));
  if (!a.csv.empty()) write_text_file(a.csv, evaluation_to_csv(r));
  return 0;
}

struct ForecastArgs {
  std::string data, checkpoint, out;
  int horizon = 10;
  int n_samples = 50;
  std::uint64_t seed = 0;
  int anchor = -1;
  int max_scenes = 0;
  bool dump_samples = false;
  DsFlags ds;
};

int do_forecast(const ForecastArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const auto scenes = load_scene_sequences(a.data);
  require_labels(scenes, "forecast");
  const DSConfig ds = a.ds.config();
  std::vector<ScenePartitions> results;
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    if (a.max_scenes > 0 && static_cast<int>(results.size()) >= a.max_scenes) break;
    const SceneSequence& s = scenes[k];
    const int anchor = a.anchor >= 0 ? a.anchor : static_cast<int>(s.steps()) - 1 - a.horizon;
    if (anchor < 2 * ckpt.seq_len - 2 || anchor + a.horizon >= static_cast<int>(s.steps())) {
      err << "skipping scene '" << s.scene_id << "': too short for anchor " << anchor << " and horizon "
          << a.horizon << "\n";
      continue;
    }
    const ForecastInput in = build_forecast_input(ckpt.params, s, anchor, ckpt.seq_len, ckpt.scaler);
    ScenePartitions sp;
    sp.scene_id = s.scene_id;
    sp.anchor_step = anchor;
    sp.gt = forecast_ground_truth(s, anchor, a.horizon, in.persons);
    sp.forecast = forecast_groups(in.edges, a.horizon, a.n_samples, ds, mix_seed(a.seed, k));
    sp.forecast.persons = in.persons;
    results.push_back(std::move(sp));
  }
  if (results.empty()) throw std::runtime_error("no scene is long enough to forecast");
  const ForecastReport r = summarize_forecasts(results);
  out << forecast_to_text(r);
  if (!a.out.empty())
    write_text_file(a.out, forecast_to_json(r, a.dump_samples ? std::span<const ScenePartitions>(results)
                                                              : std::span<const ScenePartitions>()));
  return 0;
}

struct GradArgs {
  std::uint64_t seed = 0;
  int n_people = 4;
  int seq_len = 3;
  int hidden = 8;
  int windows = 3;
};

int do_gradcheck(const GradArgs& a, std::ostream& out) {
  const GradCheckProblem p = make_grad_check_problem(a.seed, a.n_people, a.seq_len, a.hidden, a.windows);
  const GradCheckReport r = grad_check(p.params, p.batch);
  char line[256];
  std::snprintf(line, sizeof(line),
                "max relative error %.3e over %lld parameters (worst index %lld: analytic %.10g, numeric %.10g)\n",
                r.max_relative_error, static_cast<long long>(r.parameters), static_cast<long long>(r.worst_index),
                r.analytic, r.numeric);
  out << line;
  if (r.max_relative_error < kGradTolerance) {
    out << "PASS (< 1e-05)\n";
    return 0;
  }
  out << "FAIL (>= 1e-05)\n";
  return 1;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detect and forecast conversation groups in social scenes", "fform"};
  app.require_subcommand(1);
  const std::set<std::string> sections = {"synth", "train", "detect", "evaluate", "forecast", "gradcheck"};
  app.config_formatter(std::make_shared<JsonConfig>(&app, sections));
  app.set_config("--config", "", "JSON config file; command-line flags take precedence");

  auto add_sub = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->fallthrough();  // lets --config follow the subcommand name
    sub->footer("--config FILE reads defaults from a JSON file; flags take precedence.");
    return sub;
  };

  SynthArgs synth;
  {
    CLI::App* s = add_sub("synth", "Generate a labelled synthetic scene corpus");
    s->add_option("--out", synth.out, "Output scene file (JSON Lines)")->required();
    s->add_option("--seed", synth.config.seed)->capture_default_str();
    s->add_option("--n-scenes", synth.config.n_scenes)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--steps", synth.config.steps_per_scene)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--n-people", synth.config.n_people)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--min-people", synth.config.min_people)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--group-sizes", synth.config.group_size_distribution, "Weights of group sizes 1, 2, 3, ...")
        ->capture_default_str();
    s->add_option("--event-rate", synth.config.event_rate, "Expected membership events per 100 steps")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    s->add_option("--o-space-radius", synth.config.o_space_radius)->capture_default_str();
    s->add_option("--arena-size", synth.config.arena_size)->capture_default_str();
    s->add_option("--walking-speed", synth.config.walking_speed)->capture_default_str();
    s->add_option("--position-noise", synth.config.position_noise_std)->capture_default_str();
    s->add_option("--orientation-noise", synth.config.orientation_noise_std)->capture_default_str();
    s->add_option("--exit-probability", synth.config.exit_probability)->capture_default_str();
    s->add_option("--subsample", synth.subsample_factor, "Keep every k-th frame")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  TrainArgs tr;
  {
    CLI::App* s = add_sub("train", "Fit the affinity network and write a checkpoint");
    s->add_option("--data", tr.data, "Labelled scene file")->required()->check(CLI::ExistingFile);
    s->add_option("--checkpoint", tr.checkpoint, "Checkpoint to write")->required();
    s->add_option("--out", tr.log, "Training log CSV (default: <checkpoint>.log.csv)");
    s->add_option("--hidden-size", tr.config.hidden_size)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--seq-len", tr.config.seq_len)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--lr", tr.config.learning_rate)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--epochs", tr.config.epochs)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--batch-size", tr.config.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--clip-norm", tr.config.clip_norm)->capture_default_str();
    s->add_option("--windows-per-epoch", tr.config.windows_per_epoch, "0 uses every training window")
        ->capture_default_str();
    s->add_option("--stride", tr.stride, "Step between window end points")->check(CLI::PositiveNumber)
        ->capture_default_str();
    s->add_option("--seed", tr.config.seed)->capture_default_str();
  }

  DetectArgs det;
  {
    CLI::App* s = add_sub("detect", "Predict affinities and cluster them into groups");
    s->add_option("--data", det.data, "Scene file")->required()->check(CLI::ExistingFile);
    s->add_option("--checkpoint", det.checkpoint)->required()->check(CLI::ExistingFile);
    s->add_option("--out", det.out, "Partitions file to write")->required();
    s->add_option("--split", det.split, "Which chronological part of each scene to process")
        ->check(CLI::IsMember({"train", "val", "test", "all"}))
        ->capture_default_str();
    add_ds_flags(s, det.ds);
  }

  EvaluateArgs ev;
  {
    CLI::App* s = add_sub("evaluate", "Score detected partitions against ground truth");
    s->add_option("--data", ev.data, "Labelled scene file")->required()->check(CLI::ExistingFile);
    s->add_option("--detections", ev.detections, "Partitions file written by detect")
        ->required()
        ->check(CLI::ExistingFile);
    s->add_option("--out", ev.out, "JSON report to write");
    s->add_option("--csv", ev.csv, "CSV report to write");
    s->add_option("--thr", ev.thr, "Group match thresholds")
        ->check(CLI::Range(1e-9, 1.0))
        ->capture_default_str();
  }

  ForecastArgs fc;
  {
    CLI::App* s = add_sub("forecast", "Forecast future groups from per-edge Gaussian processes");
    s->add_option("--data", fc.data, "Labelled scene file")->required()->check(CLI::ExistingFile);
    s->add_option("--checkpoint", fc.checkpoint)->required()->check(CLI::ExistingFile);
    s->add_option("--out", fc.out, "JSON report to write");
    s->add_option("--horizon", fc.horizon, "Forecast horizon in steps")->check(CLI::PositiveNumber)
        ->capture_default_str();
    s->add_option("--n-samples", fc.n_samples, "Posterior samples per edge")->check(CLI::PositiveNumber)
        ->capture_default_str();
    s->add_option("--seed", fc.seed)->capture_default_str();
    s->add_option("--anchor", fc.anchor, "Last observed step (default: as late as the horizon allows)");
    s->add_option("--max-scenes", fc.max_scenes, "Forecast at most this many scenes (0: all)")
        ->capture_default_str();
    s->add_flag("--dump-samples", fc.dump_samples, "Include every sampled partition in the report");
    add_ds_flags(s, fc.ds);
  }

  GradArgs gc;
  {
    CLI::App* s = add_sub("gradcheck", "Compare analytic and finite-difference gradients");
    s->add_option("--seed", gc.seed)->capture_default_str();
    s->add_option("--n-people", gc.n_people)->check(CLI::Range(2, 64))->capture_default_str();
    s->add_option("--seq-len", gc.seq_len)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--hidden-size", gc.hidden)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--windows", gc.windows)->check(CLI::PositiveNumber)->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "synth") return do_synth(synth, out);
    if (cmd == "train") return do_train(tr, out);
    if (cmd == "detect") return do_detect(det, out);
    if (cmd == "evaluate") return do_evaluate(ev, out);
    if (cmd == "forecast") return do_forecast(fc, out, err);
    if (cmd == "gradcheck") return do_gradcheck(gc, out);
  } catch (const SceneError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace fform::cli
