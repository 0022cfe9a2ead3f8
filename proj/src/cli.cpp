#include "ctxmotion/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include "ctxmotion/checkpoint.hpp"
#include "ctxmotion/errors.hpp"
#include "ctxmotion/evaluation.hpp"
#include "ctxmotion/manifest.hpp"
#include "ctxmotion/motion_model.hpp"
#include "ctxmotion/synthetic.hpp"
#include "ctxmotion/training.hpp"

namespace fs = std::filesystem;

namespace ctxmotion {

namespace {

struct Options {
  std::vector<std::string> scenes;
  std::vector<std::string> checkpoints;
  std::string variant = "crnn-li";
  std::uint64_t seed = 0;
  std::size_t max_steps = 10000;
  std::size_t patience = 10;
  std::size_t batch = 16;
  std::string out;
  bool fine = false;
  bool no_augment = false;
  bool no_context = false;
  bool with_li = false;
  bool with_omp = false;
  bool all_train = false;
  std::size_t human_hidden = 1024;
  std::size_t context_hidden = 256;
  std::size_t interaction_hidden = 128;
  double input_scale = 1.0;
  std::string kind = "pick_place";
  std::size_t count = 1;
  std::size_t duration = 60;
  double noise = synthetic::kDefaultNoiseMm;
  std::string group = "type";
};

// Files are taken as given, directories contribute their *.jsonl files in
// name order.
std::vector<std::string> expand_scene_paths(const std::vector<std::string>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  if (out.empty()) throw ResourceError("no scene files given");
  return out;
}

std::vector<SceneSequence> load_scenes(const std::vector<std::string>& files) {
  std::vector<SceneSequence> out;
  for (const auto& f : files) {
    out.push_back(read_scene_file(f));
    if (!(out.back().vocabulary == out.front().vocabulary)) {
      throw VocabularyError(f + ": vocabulary differs from " + files.front());
    }
  }
  return out;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return dir.empty() ? name : (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot write " + path);
  out << text;
}

ModelConfig config_from(const Options& o, const Vocabulary& vocabulary) {
  const Variant v = parse_variant(o.variant);
  if (v == Variant::ZeroVelocity) throw ContractError("the zv baseline has no parameters to train");
  ModelConfig c = ModelConfig::for_variant(v);
  if (o.no_context) c.context_enabled = false;
  if (o.with_li) c.learn_interactions = true;
  if (o.with_omp) c.object_motion = true;
  c.human_hidden = o.human_hidden;
  c.context_hidden = o.context_hidden;
  c.interaction_hidden = o.interaction_hidden;
  c.input_scale = o.input_scale;
  c.vocabulary = vocabulary;
  c.validate();
  return c;
}

void require_vocabulary(const MotionModel& model, const Vocabulary& vocabulary, const std::string& path) {
  if (!(model.config().vocabulary == vocabulary)) {
    throw VersionError(path + ": checkpoint vocabulary does not match the scene vocabulary");
  }
}

std::vector<SceneSequence> pick(const std::vector<SceneSequence>& all, const std::vector<std::size_t>& idx) {
  std::vector<SceneSequence> out;
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

void record_common(RunManifest& m, const Options& o) {
  m.seed = o.seed;
  m.options.emplace_back("out", o.out);
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const auto files = expand_scene_paths(o.scenes);
  const auto seqs = load_scenes(files);
  const ModelConfig config = config_from(o, seqs.front().vocabulary);

  DatasetSplit split;
  if (o.all_train) {
    for (std::size_t i = 0; i < seqs.size(); ++i) split.train.push_back(i);
  } else {
    split = split_dataset(seqs.size(), o.seed);
  }
  const auto train_windows = extract_windows(pick(seqs, split.train), config.observed, config.predicted);
  const auto val_windows = extract_windows(pick(seqs, split.validation), config.observed, config.predicted);
  if (train_windows.empty()) throw DataError("training sequences are too short for one window");

  TrainOptions opts;
  opts.seed = o.seed;
  opts.max_steps = o.max_steps;
  opts.patience = o.patience;
  opts.batch_size = o.batch;
  opts.augment = !o.no_augment;
  opts.log = [&err](const std::string& msg) { err << msg << '\n'; };
  const TrainResult result = train(train_windows, val_windows, config, opts);

  ensure_dir(o.out);
  const std::string ckpt = o.checkpoints.empty() ? join(o.out, "model.ckpt") : o.checkpoints.front();
  if (const auto parent = fs::path(ckpt).parent_path(); !parent.empty()) ensure_dir(parent.string());
  save_checkpoint(ckpt, result.model);
  result.report.write_loss_csv(join(o.out, "train_loss.csv"));
  result.report.write_epoch_csv(join(o.out, "train_epochs.csv"));

  RunManifest m;
  m.command = "train";
  record_common(m, o);
  m.config_json = config.to_json();
  m.options.emplace_back("variant", o.variant);
  m.options.emplace_back("max_steps", std::to_string(o.max_steps));
  m.options.emplace_back("patience", std::to_string(o.patience));
  m.options.emplace_back("batch", std::to_string(o.batch));
  m.options.emplace_back("augment", o.no_augment ? "false" : "true");
  m.options.emplace_back("all_train", o.all_train ? "true" : "false");
  m.options.emplace_back("checkpoint", ckpt);
  for (const auto& f : files) m.add_input(f);
  m.write(join(o.out, "manifest.json"));

  out << "trained " << variant_label(config.variant()) << " for " << result.report.losses.size() << " steps ("
      << result.report.epochs.size() << " epochs, " << train_windows.size() << " training windows)\n";
  if (!result.report.losses.empty()) {
    out << "loss " << result.report.losses.front() << " -> " << result.report.losses.back() << '\n';
  }
  out << "checkpoint " << ckpt << '\n';
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto files = expand_scene_paths(o.scenes);
  const auto seqs = load_scenes(files);
  const auto windows = extract_windows(seqs);
  if (windows.empty()) throw DataError("scenes are too short for one evaluation window");

  auto human = eval::HorizonTable::human(o.fine);
  auto object = eval::HorizonTable::object(o.fine);
  const auto zv = eval::evaluate_zero_velocity(windows);
  human.set_row(variant_label(Variant::ZeroVelocity), zv.human);
  if (!zv.object.empty()) object.set_row(variant_label(Variant::ZeroVelocity), zv.object);

  RunManifest m;
  m.command = "eval";
  record_common(m, o);
  m.options.emplace_back("fine_horizons", o.fine ? "true" : "false");
  for (const auto& path : o.checkpoints) {
    const MotionModel model = load_checkpoint(path);
    require_vocabulary(model, seqs.front().vocabulary, path);
    const auto& c = model.config();
    const auto model_windows =
        (c.observed == 10 && c.predicted == 20) ? windows : extract_windows(seqs, c.observed, c.predicted);
    const auto e = eval::evaluate_model(model, model_windows);
    const std::string label = variant_label(c.variant());
    human.set_row(label, e.human);
    if (c.object_motion && !e.object.empty()) object.set_row(label, e.object);
    m.add_input(path);
  }
  for (const auto& f : files) m.add_input(f);

  ensure_dir(o.out);
  write_text(join(o.out, "human_errors.csv"), human.to_csv());
  write_text(join(o.out, "human_errors.txt"), human.to_text());
  write_text(join(o.out, "object_errors.csv"), object.to_csv());
  write_text(join(o.out, "object_errors.txt"), object.to_text());
  m.write(join(o.out, "manifest.json"));
  out << human.to_text() << '\n' << object.to_text();
  return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out) {
  if (o.scenes.size() != 1) throw ContractError("predict takes exactly one scene file");
  if (o.out.empty()) throw ContractError("predict needs --out <file>");
  const SceneSequence seq = read_scene_file(o.scenes.front());

  std::optional<MotionModel> model;
  const bool zv = o.checkpoints.empty();
  if (zv && parse_variant(o.variant) != Variant::ZeroVelocity) {
    throw ContractError("predict needs --checkpoint unless --variant zv");
  }
  if (!zv) {
    model = load_checkpoint(o.checkpoints.front());
    require_vocabulary(*model, seq.vocabulary, o.checkpoints.front());
  }
  const std::size_t observed = model ? model->config().observed : 10;
  const std::size_t predicted = model ? model->config().predicted : 20;
  if (seq.frames.size() < observed) {
    throw DataError("scene has " + std::to_string(seq.frames.size()) + " frames, prediction needs " +
                    std::to_string(observed));
  }
  Window window;
  window.observed.assign(seq.frames.end() - static_cast<std::ptrdiff_t>(observed), seq.frames.end());
  const PredictionBundle bundle = model ? model->predict(window) : zero_velocity_baseline(window, predicted);

  SceneSequence result;
  result.step_ms = seq.step_ms;
  result.vocabulary = seq.vocabulary;
  result.frames = window.observed;
  const Frame& last = window.observed.back();
  for (std::size_t s = 0; s < bundle.poses.size(); ++s) {
    Frame f = last;
    f.t_index = last.t_index + static_cast<std::int64_t>(s + 1);
    f.predicted = true;
    for (std::size_t h = 0; h < bundle.human_slots.size(); ++h) {
      auto& e = f.entities[bundle.human_slots[h]];
      e.skeleton = bundle.poses[s][h];
      e.box = BoundingBox::around(*e.skeleton);
    }
    if (bundle.has_boxes()) {
      // Predicted corners can cross; the file format wants min <= max.
      for (std::size_t i = 0; i < f.entities.size(); ++i) {
        if (f.entities[i].skeleton) continue;
        auto& b = f.entities[i].box;
        b = bundle.boxes[s][i];
        for (std::size_t k = 0; k < 3; ++k)
          if (b.min_corner[k] > b.max_corner[k]) std::swap(b.min_corner[k], b.max_corner[k]);
      }
    }
    result.frames.push_back(std::move(f));
  }
  if (const auto parent = fs::path(o.out).parent_path(); !parent.empty()) ensure_dir(parent.string());
  write_scene_file(o.out, result);
  if (!bundle.interactions.empty()) {
    std::ofstream csv(o.out + ".interactions.csv");
    if (!csv) throw ResourceError("cannot write " + o.out + ".interactions.csv");
    const auto records = eval::interaction_records(bundle);
    eval::write_interaction_csv(csv, records);
  }
  RunManifest m;
  m.command = "predict";
  record_common(m, o);
  if (model) m.config_json = model->config().to_json();
  m.add_input(o.scenes.front());
  for (const auto& c : o.checkpoints) m.add_input(c);
  m.write(o.out + ".manifest.json");
  out << "wrote " << bundle.poses.size() << " predicted frames to " << o.out << '\n';
  return kExitOk;
}

int cmd_gen_synthetic(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw ContractError("gen-synthetic needs --out <directory>");
  if (o.count == 0) throw SpecError("--count must be positive");
  synthetic::ScenarioSpec spec;
  spec.kind = synthetic::parse_kind(o.kind);
  spec.duration = o.duration;
  spec.noise_mm = o.noise;
  spec.validate(Vocabulary::standard());
  ensure_dir(o.out);
  Rng seeds(o.seed);
  RunManifest m;
  m.command = "gen-synthetic";
  record_common(m, o);
  m.options.emplace_back("kind", o.kind);
  m.options.emplace_back("count", std::to_string(o.count));
  m.options.emplace_back("duration", std::to_string(o.duration));
  m.options.emplace_back("noise", std::to_string(o.noise));
  for (std::size_t i = 0; i < o.count; ++i) {
    spec.seed = seeds.next();
    const auto [seq, truth] = synthetic::generate(spec);
    char name[64];
    std::snprintf(name, sizeof name, "%s_%03zu", o.kind.c_str(), i);
    const std::string scene = join(o.out, std::string(name) + ".jsonl");
    write_scene_file(scene, seq);
    std::ofstream csv(join(o.out, std::string(name) + ".truth.csv"));
    if (!csv) throw ResourceError("cannot write ground truth for " + scene);
    synthetic::write_ground_truth_csv(csv, truth);
  }
  m.write(join(o.out, "manifest.json"));
  out << "wrote " << o.count << ' ' << o.kind << " scenes to " << o.out << '\n';
  return kExitOk;
}

int cmd_inspect(const Options& o, std::ostream& out) {
  if (o.checkpoints.size() != 1) throw ContractError("inspect-interactions takes one --checkpoint");
  const auto files = expand_scene_paths(o.scenes);
  const auto seqs = load_scenes(files);
  const MotionModel model = load_checkpoint(o.checkpoints.front());
  require_vocabulary(model, seqs.front().vocabulary, o.checkpoints.front());
  if (!model.config().context_enabled) throw ContractError("the checkpoint has no context branch");
  if (o.group != "type" && o.group != "entity") throw ContractError("--group must be type or entity");

  std::map<std::string, std::string> type_of;
  for (const auto& s : seqs)
    for (const auto& e : s.frames.front().entities) type_of[e.id] = s.vocabulary.name(e.type);

  ensure_dir(join(o.out, "interactions"));
  std::vector<std::vector<eval::InteractionRecord>> all;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto windows = extract_windows({seqs[i]}, model.config().observed, model.config().predicted);
    const std::string stem = fs::path(files[i]).stem().string();
    for (const auto& w : windows) {
      all.push_back(eval::interaction_records(model.predict(w)));
      std::ofstream csv(join(join(o.out, "interactions"), stem + "_w" + std::to_string(w.start) + ".csv"));
      if (!csv) throw ResourceError("cannot write interaction CSV under " + o.out);
      eval::write_interaction_csv(csv, all.back());
    }
  }
  const auto curves = eval::interaction_statistics(
      all, [&](const std::string& id) { return type_of.at(id); },
      o.group == "type" ? eval::Grouping::ByType : eval::Grouping::ByEntity);
  std::ofstream stats(join(o.out, "interaction_stats.csv"));
  if (!stats) throw ResourceError("cannot write interaction_stats.csv under " + o.out);
  eval::write_curves_csv(stats, curves);

  RunManifest m;
  m.command = "inspect-interactions";
  record_common(m, o);
  m.config_json = model.config().to_json();
  m.options.emplace_back("group", o.group);
  m.add_input(o.checkpoints.front());
  for (const auto& f : files) m.add_input(f);
  m.write(join(o.out, "manifest.json"));
  out << "wrote interactions of " << all.size() << " windows to " << o.out << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-aware human and object motion prediction"};
  app.require_subcommand(1);
  Options o;

  const auto model_flags = [&o](CLI::App* c) {
    c->add_option("--variant", o.variant, "zv, rnn, crnn, crnn-li, crnn-omp or crnn-omp-li");
    c->add_flag("--no-context", o.no_context, "Disable the context branch");
    c->add_flag("--li", o.with_li, "Learn the interaction adjacency");
    c->add_flag("--omp", o.with_omp, "Predict object boxes");
    c->add_option("--human-hidden", o.human_hidden, "Human GRU width");
    c->add_option("--context-hidden", o.context_hidden, "Context GRU width");
    c->add_option("--interaction-hidden", o.interaction_hidden, "Interaction head width");
    c->add_option("--scale-inputs", o.input_scale, "Multiplier for coordinates entering the networks");
  };

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--scenes", o.scenes, "Scene files or directories")->required();
  train_cmd->add_option("--checkpoint", o.checkpoints, "Output checkpoint (default <out>/model.ckpt)");
  train_cmd->add_option("--seed", o.seed);
  train_cmd->add_option("--max-steps", o.max_steps);
  train_cmd->add_option("--patience", o.patience, "Epochs without validation improvement");
  train_cmd->add_option("--batch", o.batch);
  train_cmd->add_option("--out", o.out, "Report directory")->required();
  train_cmd->add_flag("--no-augment", o.no_augment, "Disable random rotation/translation");
  train_cmd->add_flag("--all-train", o.all_train, "Train on every sequence, no validation split");
  model_flags(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Horizon-wise error tables");
  eval_cmd->add_option("--scenes", o.scenes)->required();
  eval_cmd->add_option("--checkpoint", o.checkpoints, "One checkpoint per model row");
  eval_cmd->add_option("--out", o.out)->required();
  eval_cmd->add_flag("--fine-horizons", o.fine, "All 20 horizons instead of 0.5/1/1.5/2 s");
  eval_cmd->add_option("--seed", o.seed);

  auto* predict_cmd = app.add_subcommand("predict", "Predict the frames after a scene");
  predict_cmd->add_option("--scenes", o.scenes)->required();
  predict_cmd->add_option("--checkpoint", o.checkpoints);
  predict_cmd->add_option("--variant", o.variant, "Use zv to run the baseline without a checkpoint");
  predict_cmd->add_option("--out", o.out, "Output scene file")->required();
  predict_cmd->add_option("--seed", o.seed);

  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate synthetic scenes");
  gen_cmd->add_option("--kind", o.kind, "pick_place, pass_object or static_clutter");
  gen_cmd->add_option("--count", o.count);
  gen_cmd->add_option("--duration", o.duration, "Frames at 100 ms");
  gen_cmd->add_option("--noise", o.noise, "Gaussian noise sigma in mm");
  gen_cmd->add_option("--seed", o.seed);
  gen_cmd->add_option("--out", o.out)->required();

  auto* inspect_cmd = app.add_subcommand("inspect-interactions", "Dump learned adjacency series");
  inspect_cmd->add_option("--scenes", o.scenes)->required();
  inspect_cmd->add_option("--checkpoint", o.checkpoints)->required();
  inspect_cmd->add_option("--out", o.out)->required();
  inspect_cmd->add_option("--group", o.group, "Aggregate by entity type or entity id");
  inspect_cmd->add_option("--seed", o.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(o, out, err);
    if (eval_cmd->parsed()) return cmd_eval(o, out);
    if (predict_cmd->parsed()) return cmd_predict(o, out);
    if (gen_cmd->parsed()) return cmd_gen_synthetic(o, out);
    if (inspect_cmd->parsed()) return cmd_inspect(o, out);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ResourceError& e) {
    err << "missing resource: " << e.what() << '\n';
    return kExitResource;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitValidation;
}

}  // namespace ctxmotion
