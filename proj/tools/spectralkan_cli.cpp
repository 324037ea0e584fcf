// spectralkan: synthesize data, train and evaluate change-detection models,
// report parameter/FLOP accounting and run gradient checks.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spectralkan/checkpoint.hpp"
#include "spectralkan/data.hpp"
#include "spectralkan/errors.hpp"
#include "spectralkan/pipeline.hpp"
#include "spectralkan/rng.hpp"
#include "spectralkan/training.hpp"

namespace sk = spectralkan;

namespace {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitCheckFailed = 4,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Node list such as "25,16,1"; "b" stands for the band count.
std::vector<std::size_t> parse_nodes(const std::string& text, std::size_t bands) {
  std::vector<std::size_t> nodes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "b") {
      nodes.push_back(bands);
      continue;
    }
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      nodes.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("invalid node list entry '" + item + "' in '" + text + "'");
    }
  }
  if (nodes.size() < 2) throw ConfigError("node list '" + text + "' needs at least two entries");
  return nodes;
}

struct ModelFlags {
  std::string variant = "spectral-kan";
  std::size_t patch_size = 5;
  std::string spatial_nodes;
  std::string spectral_nodes;
};

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
  cmd->add_option("--variant", flags.variant,
                  "mlp | mlp-ss | kan | kan-enc | kan-ss | spectral-kan")
      ->capture_default_str();
  cmd->add_option("--patch-size", flags.patch_size, "Odd patch side length")->capture_default_str();
  cmd->add_option("--spatial-nodes", flags.spatial_nodes,
                  "Spatial encoder node list, default p*p,16,1");
  cmd->add_option("--spectral-nodes", flags.spectral_nodes,
                  "Spectral node list, default b,16,2; flat variants reuse its hidden widths");
}

sk::ModelConfig make_model_config(const ModelFlags& flags, std::size_t bands) {
  const auto variant = sk::parse_variant(flags.variant);
  if (!variant) throw ConfigError("unknown variant '" + flags.variant + "'");
  sk::ModelConfig config = sk::ModelConfig::standard(*variant, bands, flags.patch_size);
  const std::size_t p2 = flags.patch_size * flags.patch_size;
  if (sk::is_spatial_spectral(*variant)) {
    if (!flags.spatial_nodes.empty()) config.spatial_nodes = parse_nodes(flags.spatial_nodes, bands);
    if (!flags.spectral_nodes.empty())
      config.spectral_nodes = parse_nodes(flags.spectral_nodes, bands);
  } else {
    if (!flags.spatial_nodes.empty())
      throw ConfigError("--spatial-nodes does not apply to the flat variant " + flags.variant);
    if (!flags.spectral_nodes.empty()) {
      auto nodes = parse_nodes(flags.spectral_nodes, bands);
      if (nodes.front() != bands)
        throw ConfigError("spectral node list must start with the band count " +
                          std::to_string(bands));
      nodes.front() = p2 * bands;
      config.flat_nodes = nodes;
    }
  }
  try {
    config.validate();
  } catch (const sk::ContractError& e) {
    throw ConfigError(e.what());
  }
  return config;
}

// ---------------------------------------------------------------------- synth

struct SynthFlags {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 30;
  double change_fraction = 0.3;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

int cmd_synth(const SynthFlags& f) {
  if (f.height == 0 || f.width == 0 || f.bands == 0)
    throw ConfigError("synthetic dimensions must be positive");
  if (!(f.change_fraction >= 0.0 && f.change_fraction <= 1.0))
    throw ConfigError("--change-fraction must lie in [0, 1]");
  if (!(f.noise_sigma >= 0.0)) throw ConfigError("--noise-sigma must be non-negative");

  const auto scene =
      sk::synth_dataset(f.height, f.width, f.bands, f.change_fraction, f.noise_sigma, f.seed);
  const std::filesystem::path dir(f.out_dir);
  std::filesystem::create_directories(dir);
  sk::save_cube(dir / "t1.json", scene.before);
  sk::save_cube(dir / "t2.json", scene.after);
  sk::save_label_map(dir / "labels.pgm", scene.labels);

  std::size_t changed = 0;
  for (auto l : scene.labels.labels) changed += l == sk::LabelMap::kChanged;
  nlohmann::ordered_json manifest;
  manifest["generator"] = "synthetic";
  manifest["height"] = f.height;
  manifest["width"] = f.width;
  manifest["bands"] = f.bands;
  manifest["change_fraction"] = f.change_fraction;
  manifest["noise_sigma"] = f.noise_sigma;
  manifest["seed"] = f.seed;
  manifest["changed_pixels"] = changed;
  manifest["unchanged_pixels"] = f.height * f.width - changed;
  manifest["files"] = {{"before", "t1.json"}, {"after", "t2.json"}, {"labels", "labels.pgm"}};
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw sk::IoError(sk::IoError::Kind::Write, "failed writing manifest.json");
  std::cout << "wrote " << (dir / "t1.json").string() << ", " << (dir / "t2.json").string()
            << ", " << (dir / "labels.pgm").string() << ", "
            << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------- train

struct DataFlags {
  std::string before;
  std::string after;
  std::string labels;
};

void add_data_flags(CLI::App* cmd, DataFlags& flags) {
  cmd->add_option("--before", flags.before, "First-epoch cube header (JSON)")->required();
  cmd->add_option("--after", flags.after, "Second-epoch cube header (JSON)")->required();
  cmd->add_option("--labels", flags.labels, "Ground-truth PGM (0/1/255)")->required();
}

struct TrainFlags {
  ModelFlags model;
  DataFlags data;
  sk::TrainConfig train;
  double train_fraction = 0.01;
  std::uint64_t seed = 0;
  std::string out_dir = "run";
};

int cmd_train(const TrainFlags& f) {
  if (!(f.train_fraction > 0.0 && f.train_fraction < 1.0))
    throw ConfigError("--train-fraction must lie in (0, 1)");
  try {
    f.train.validate();
  } catch (const sk::ContractError& e) {
    throw ConfigError(e.what());
  }

  const sk::Dataset data = sk::load_dataset(f.data.before, f.data.after, f.data.labels);
  sk::TrainOptions options;
  options.model = make_model_config(f.model, data.before.bands());
  options.train = f.train;
  options.train_fraction = f.train_fraction;
  options.seed = f.seed;

  const sk::TrainOutcome outcome = sk::run_training(data, options);
  sk::write_training_outputs(f.out_dir, outcome, options);
  const auto report = sk::metrics_report(outcome.test_confusion);
  std::cout << "variant " << f.model.variant << ", params " << outcome.model.total_params()
            << ", train pixels " << outcome.split.train.size() << ", test pixels "
            << outcome.split.test.size() << "\n"
            << report.dump() << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------------- eval

struct EvalFlags {
  std::string checkpoint;
  DataFlags data;
  bool all_pixels = false;
  std::string out_dir = "eval";
};

int cmd_eval(const EvalFlags& f) {
  const sk::Checkpoint ckpt = sk::load_checkpoint(f.checkpoint);
  const sk::Dataset data = sk::load_dataset(f.data.before, f.data.after, f.data.labels);
  const sk::EvalOutcome outcome = sk::run_evaluation(ckpt, data, f.all_pixels);
  sk::write_eval_outputs(f.out_dir, outcome, data.labels);
  std::cout << sk::metrics_report(outcome.confusion).dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------- count

struct CountFlags {
  ModelFlags model;
  std::size_t bands = 155;
};

int cmd_count(const CountFlags& f) {
  if (f.bands == 0) throw ConfigError("--bands must be positive");
  const sk::ModelConfig config = make_model_config(f.model, f.bands);
  // Accounting does not depend on parameter values.
  const sk::Model model = sk::Model::zeros(config);
  std::cout << sk::accounting_report(model).dump(2) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ gradcheck

struct GradcheckFlags {
  std::string variant = "spectral-kan";
  double threshold = 1e-4;
  double step = 1e-5;
  std::uint64_t seed = 0;
};

int cmd_gradcheck(const GradcheckFlags& f) {
  const auto variant = sk::parse_variant(f.variant);
  if (!variant) throw ConfigError("unknown variant '" + f.variant + "'");
  if (!(f.step > 0.0)) throw ConfigError("--step must be positive");

  sk::ModelConfig config = sk::ModelConfig::standard(*variant, 4, 3);
  if (sk::is_spatial_spectral(*variant)) {
    config.spatial_nodes = {9, 4, 1};
    config.spectral_nodes = {4, 3, 2};
  } else {
    config.flat_nodes = {36, 3, 2};
  }
  const sk::Model model = sk::Model::build(config, f.seed);

  sk::PatchSet batch;
  batch.patch_size = 3;
  batch.bands = 4;
  sk::Rng rng(sk::derive_seed(f.seed, 1));
  for (std::size_t n = 0; n < 4; ++n) {
    for (std::size_t k = 0; k < batch.patch_values(); ++k)
      batch.patches.push_back(sk::uniform(rng, -1.0, 1.0));
    batch.labels.push_back(static_cast<std::uint8_t>(n % 2));
  }

  const double worst = sk::gradient_check(model, batch, f.step);
  const bool pass = worst < f.threshold;
  std::cout << "variant " << f.variant << ": " << model.total_params()
            << " params, max relative error " << worst << " (threshold " << f.threshold << ") "
            << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SpectralKAN hyperspectral change detection"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults; flags take precedence");

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic bi-temporal scene");
  synth_cmd->add_option("--height", synth.height)->capture_default_str();
  synth_cmd->add_option("--width", synth.width)->capture_default_str();
  synth_cmd->add_option("--bands", synth.bands)->capture_default_str();
  synth_cmd->add_option("--change-fraction", synth.change_fraction)->capture_default_str();
  synth_cmd->add_option("--noise-sigma", synth.noise_sigma)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--out-dir", synth.out_dir)->capture_default_str();

  TrainFlags train;
  auto* train_cmd = app.add_subcommand("train", "Train a model and score its test split");
  add_model_flags(train_cmd, train.model);
  add_data_flags(train_cmd, train.data);
  train_cmd->add_option("--epochs", train.train.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", train.train.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", train.train.base_lr)->capture_default_str();
  train_cmd->add_option("--decay-factor", train.train.decay_factor)->capture_default_str();
  train_cmd->add_option("--decay-every", train.train.decay_every)->capture_default_str();
  train_cmd->add_option("--train-fraction", train.train_fraction)->capture_default_str();
  train_cmd->add_option("--seed", train.seed)->capture_default_str();
  train_cmd->add_option("--out-dir", train.out_dir)->capture_default_str();

  EvalFlags eval;
  auto* eval_cmd = app.add_subcommand("eval", "Predict a change map and score a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
  add_data_flags(eval_cmd, eval.data);
  eval_cmd->add_flag("--all-pixels", eval.all_pixels,
                     "Score every known pixel instead of the checkpoint's test split");
  eval_cmd->add_option("--out-dir", eval.out_dir)->capture_default_str();

  CountFlags count;
  auto* count_cmd = app.add_subcommand("count", "Print parameter and FLOP accounting");
  add_model_flags(count_cmd, count.model);
  count_cmd->add_option("--bands", count.bands)->capture_default_str();

  GradcheckFlags gradcheck;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of a tiny model");
  grad_cmd->add_option("--variant", gradcheck.variant)->capture_default_str();
  grad_cmd->add_option("--threshold", gradcheck.threshold)->capture_default_str();
  grad_cmd->add_option("--step", gradcheck.step)->capture_default_str();
  grad_cmd->add_option("--seed", gradcheck.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth);
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*count_cmd) return cmd_count(count);
    if (*grad_cmd) return cmd_gradcheck(gradcheck);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const sk::IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const sk::ContractError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const sk::UndefinedMetricError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
