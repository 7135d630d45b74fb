// hanet: command-line front end for vocabulary building, synthetic data,
// training, evaluation and inspection of trained runs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hanet/binary_io.hpp"
#include "hanet/checkpoint.hpp"
#include "hanet/error.hpp"
#include "hanet/model.hpp"
#include "hanet/ops.hpp"
#include "hanet/parallel.hpp"
#include "hanet/run_config.hpp"
#include "hanet/synthetic.hpp"
#include "hanet/training.hpp"

namespace fs = std::filesystem;
using namespace hanet;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct LoadedRun {
  RunConfig config;
  Dataset data;
  std::unique_ptr<HanetModel<float>> model;
};

LoadedRun load_run(const std::string& run_dir, const std::string& data_override) {
  LoadedRun run;
  run.config.load(run_dir + "/config.txt");
  if (!data_override.empty()) run.config.set("data", data_override);
  if (run.config.get("data").empty()) throw ConfigError("run config has no data directory");
  run.data = load_dataset(run.config.get("data"), run.config.dataset_options());
  const TrainConfig tc = run.config.train_config();
  run.model = std::make_unique<HanetModel<float>>(tc.model_config(run.data), run.data.embeddings,
                                                  run.data.roles);
  load_checkpoint(run_dir + "/checkpoint.hanc", run.model->store());
  return run;
}

const Split& pick_split(const Dataset& data, const std::string& name) {
  if (name == "train") return data.train;
  if (name == "val") return data.val;
  throw ConfigError("unknown split '" + name + "' (expected train or val)");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Undefined components (level switched off, or no verbs / nouns) are null.
template <typename T>
nlohmann::json component(const Tensor<T>& t) {
  return t.defined() ? nlohmann::json(static_cast<double>(t.item())) : nlohmann::json(nullptr);
}

int cmd_build_vocab(const std::string& annotations, const std::string& out, std::size_t k_a,
                    std::size_t k_e, const std::string& stopwords, bool lenient) {
  std::vector<std::string> diag;
  const auto anns = load_annotations(annotations, lenient, &diag);
  for (const auto& d : diag) std::cerr << "skipped: " << d << "\n";
  const auto stop = stopwords.empty() ? default_stopwords() : load_word_set(stopwords);
  const auto vocab = build_vocabulary(anns, k_a, k_e, stop);
  for (const auto& w : vocab.warnings) std::cerr << "warning: " << w << "\n";
  save_vocabulary(out, vocab);
  std::cout << "wrote " << vocab.num_actions() << " action and " << vocab.num_entities()
            << " entity concepts to " << out << "\n";
  return kOk;
}

int cmd_train(const std::string& config_file, const std::vector<std::string>& sets,
              const std::string& data_dir, const std::string& out_dir, long long seed,
              bool no_ind, bool no_loc, bool no_glo) {
  RunConfig config;
  if (!config_file.empty()) config.load(config_file);
  for (const auto& s : sets) config.assign(s);
  if (!data_dir.empty()) config.set("data", data_dir);
  if (!out_dir.empty()) config.set("out", out_dir);
  if (seed >= 0) config.set("seed", std::to_string(seed));
  if (no_ind) config.set("use_individual", "false");
  if (no_loc) config.set("use_local", "false");
  if (no_glo) config.set("use_global", "false");
  if (config.get("data").empty()) throw ConfigError("train: --data is required");
  if (config.get("out").empty()) throw ConfigError("train: --out is required");
  // Later commands read the run from any working directory.
  config.set("data", fs::absolute(config.get("data")).lexically_normal().string());
  const TrainConfig tc = config.train_config();

  DatasetOptions opts = config.dataset_options();
  std::vector<std::string> diag;
  opts.diagnostics = &diag;
  const Dataset data = load_dataset(config.get("data"), opts);
  for (const auto& d : diag) std::cerr << "skipped: " << d << "\n";

  const std::string out = config.get("out");
  fs::create_directories(out);
  binary::write_file(out + "/config.txt", config.dump());
  std::ofstream log(out + "/train_log.jsonl", std::ios::trunc);

  HanetModel<float> model(tc.model_config(data), data.embeddings, data.roles);
  const TrainResult result = train(
      model, data, tc,
      [&](const EpochLog& e) {
        log << epoch_log_json(e) << "\n";
        log.flush();
        std::cerr << "epoch " << e.epoch << " loss " << fmt(e.loss) << " val SumR "
                  << fmt(e.val.sumr) << (e.improved ? " *" : "") << "\n";
      },
      worker_threads());
  binary::write_file(out + "/checkpoint.hanc", result.best_checkpoint);

  const EvalReport& best = result.epochs.at(result.best_epoch - 1).val;
  nlohmann::json summary = nlohmann::json::parse(report_to_json(best));
  summary["best_epoch"] = result.best_epoch;
  summary["epochs_run"] = result.epochs.size();
  binary::write_file(out + "/summary.json", summary.dump(2) + "\n");
  std::cout << "best epoch " << result.best_epoch << " of " << result.epochs.size() << "\n"
            << format_report_table(best);
  return kOk;
}

int cmd_eval(const std::string& scores_path, const std::string& pairs_path,
             const std::string& run_dir, const std::string& data_dir, const std::string& split,
             const std::string& json_out) {
  EvalReport report;
  if (!scores_path.empty()) {
    const ScoreMatrix m = parse_score_matrix(binary::read_file(scores_path), scores_path);
    std::vector<std::size_t> pairs;
    if (pairs_path.empty()) {
      if (m.videos != m.captions) {
        throw ConfigError("eval: non-square score matrix needs --pairs");
      }
      for (std::size_t i = 0; i < m.captions; ++i) pairs.push_back(i);
    } else {
      std::ifstream in(pairs_path);
      if (!in) throw DataError(DataError::Code::kIo, pairs_path + ": cannot open for reading");
      std::size_t v;
      while (in >> v) pairs.push_back(v);
    }
    report = evaluate(m, pairs);
  } else {
    if (run_dir.empty()) throw ConfigError("eval: give --scores or --run");
    LoadedRun run = load_run(run_dir, data_dir);
    const Split& s = pick_split(run.data, split);
    report = evaluate(run.model->score_matrix(s, worker_threads()), s.caption_to_video());
  }
  const std::string json = report_to_json(report);
  std::cout << format_report_table(report) << json << "\n";
  if (!json_out.empty()) binary::write_file(json_out, json + "\n");
  return kOk;
}

int cmd_score(const std::string& run_dir, const std::string& data_dir, const std::string& split,
              const std::string& video_id, const std::string& caption_id) {
  LoadedRun run = load_run(run_dir, data_dir);
  const Split& s = pick_split(run.data, split);
  const VideoItem& video = s.videos[s.video_index(video_id)];
  const CaptionAnnotation& caption = s.captions[s.caption_index(caption_id)].ann;
  NoGradGuard guard;
  const auto venc = run.model->encode_videos({&video}, false);
  const auto tenc = run.model->encode_captions({&caption}, false);
  const auto b = run.model->similarity(venc.front(), tenc.front());
  nlohmann::json j = {{"video_id", video_id},
                      {"caption_id", caption_id},
                      {"c_ind_a", component(b.c_ind_a)},
                      {"c_ind_e", component(b.c_ind_e)},
                      {"c_loc_a", component(b.c_loc_a)},
                      {"c_loc_e", component(b.c_loc_e)},
                      {"c_glo_g", component(b.c_glo_g)},
                      {"c_p_a", component(b.c_p_a)},
                      {"c_p_e", component(b.c_p_e)},
                      {"c_l", component(b.c_l)},
                      {"c_p", component(b.c_p)},
                      {"score", static_cast<double>(b.score())}};
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_concept_report(const std::string& run_dir, const std::string& data_dir,
                       const std::string& split, const std::string& video_id, bool frames) {
  LoadedRun run = load_run(run_dir, data_dir);
  const Split& s = pick_split(run.data, split);
  const VideoItem& video = s.videos[s.video_index(video_id)];
  NoGradGuard guard;
  const auto enc = run.model->encode_videos({&video}, false).front();
  const auto& vocab = run.data.vocab;
  auto dump = [&](const char* title, const std::vector<std::size_t>& reliable,
                  const Tensor<float>& p, const Tensor<float>& l,
                  const std::vector<std::string>& names) {
    std::cout << title << "\n";
    for (std::size_t c : reliable) {
      std::cout << "  " << names[c] << "\t" << fmt(p.at(c));
      if (frames) {
        std::cout << "\tframes:";
        for (std::size_t t = 0; t < l.dim(0); ++t) std::cout << " " << fmt(l.at(t, c));
      }
      std::cout << "\n";
    }
  };
  std::cout << "video " << video_id << " (" << video.frames << " frames)\n";
  dump("actions", enc.reliable_a, enc.p_v_a, enc.l_v_a, vocab.actions);
  dump("entities", enc.reliable_e, enc.p_v_e, enc.l_v_e, vocab.entities);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical alignment network for video-text retrieval"};
  app.require_subcommand(1);

  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build the concept vocabulary TSV");
  std::string v_ann, v_out, v_stop;
  std::size_t v_ka = 512, v_ke = 1024;
  bool v_lenient = false;
  vocab_cmd->add_option("--annotations", v_ann, "Annotation JSONL")->required();
  vocab_cmd->add_option("--out", v_out, "Output TSV")->required();
  vocab_cmd->add_option("--k-actions", v_ka, "Number of action concepts");
  vocab_cmd->add_option("--k-entities", v_ke, "Number of entity concepts");
  vocab_cmd->add_option("--stopwords", v_stop, "Stopword list (default: shipped list)");
  vocab_cmd->add_flag("--lenient", v_lenient, "Skip malformed annotation lines");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted synthetic dataset");
  SyntheticSpec spec;
  std::string s_out;
  synth_cmd->add_option("--out", s_out, "Output directory")->required();
  synth_cmd->add_option("--seed", spec.seed, "Random seed");
  synth_cmd->add_option("--k-actions", spec.k_actions, "Action vocabulary size");
  synth_cmd->add_option("--k-entities", spec.k_entities, "Entity vocabulary size");
  synth_cmd->add_option("--train", spec.train_samples, "Training samples");
  synth_cmd->add_option("--val", spec.val_samples, "Validation samples");
  synth_cmd->add_option("--min-frames", spec.min_frames, "Minimum frames per video");
  synth_cmd->add_option("--max-frames", spec.max_frames, "Maximum frames per video");
  synth_cmd->add_option("--dim", spec.dim, "Feature and embedding width");
  synth_cmd->add_option("--sigma", spec.sigma, "Gaussian noise level");

  auto* train_cmd = app.add_subcommand("train", "Train a model into a run directory");
  std::string t_config, t_data, t_out;
  std::vector<std::string> t_sets;
  long long t_seed = -1;
  bool no_ind = false, no_loc = false, no_glo = false;
  train_cmd->add_option("--config", t_config, "key=value config file");
  train_cmd->add_option("--set", t_sets, "key=value override (repeatable)");
  train_cmd->add_option("--data", t_data, "Dataset directory");
  train_cmd->add_option("--out", t_out, "Run directory");
  train_cmd->add_option("--seed", t_seed, "Random seed");
  train_cmd->add_flag("--no-individual", no_ind, "Drop the individual level from c_l");
  train_cmd->add_flag("--no-local", no_loc, "Drop the local level from c_l");
  train_cmd->add_flag("--no-global", no_glo, "Drop the global level from c_l");

  auto* eval_cmd = app.add_subcommand("eval", "Retrieval metrics for a run or a score matrix");
  std::string e_scores, e_pairs, e_run, e_data, e_split = "val", e_json;
  eval_cmd->add_option("--scores", e_scores, "Whitespace-separated videos x captions matrix");
  eval_cmd->add_option("--pairs", e_pairs, "Ground-truth video index per caption");
  eval_cmd->add_option("--run", e_run, "Run directory");
  eval_cmd->add_option("--data", e_data, "Dataset directory override");
  eval_cmd->add_option("--split", e_split, "train or val");
  eval_cmd->add_option("--json-out", e_json, "Write the JSON report here");

  auto* score_cmd = app.add_subcommand("score", "Similarity components for one pair");
  std::string c_run, c_data, c_split = "val", c_video, c_caption;
  score_cmd->add_option("--run", c_run, "Run directory")->required();
  score_cmd->add_option("--data", c_data, "Dataset directory override");
  score_cmd->add_option("--split", c_split, "train or val");
  score_cmd->add_option("--video", c_video, "Video id")->required();
  score_cmd->add_option("--caption", c_caption, "Caption id")->required();

  auto* report_cmd = app.add_subcommand("concept-report", "Predicted concepts for one video");
  std::string r_run, r_data, r_split = "val", r_video;
  bool r_frames = false;
  report_cmd->add_option("--run", r_run, "Run directory")->required();
  report_cmd->add_option("--data", r_data, "Dataset directory override");
  report_cmd->add_option("--split", r_split, "train or val");
  report_cmd->add_option("--video", r_video, "Video id")->required();
  report_cmd->add_flag("--frames", r_frames, "Print per-frame confidences");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*vocab_cmd) return cmd_build_vocab(v_ann, v_out, v_ka, v_ke, v_stop, v_lenient);
    if (*synth_cmd) {
      write_synthetic(generate_synthetic(spec), s_out);
      std::cout << "wrote synthetic dataset to " << s_out << "\n";
      return kOk;
    }
    if (*train_cmd) return cmd_train(t_config, t_sets, t_data, t_out, t_seed, no_ind, no_loc, no_glo);
    if (*eval_cmd) return cmd_eval(e_scores, e_pairs, e_run, e_data, e_split, e_json);
    if (*score_cmd) return cmd_score(c_run, c_data, c_split, c_video, c_caption);
    if (*report_cmd) return cmd_concept_report(r_run, r_data, r_split, r_video, r_frames);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
