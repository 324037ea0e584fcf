#include "spectralkan/pipeline.hpp"

#include <fstream>
#include <string>

#include "spectralkan/errors.hpp"
#include "spectralkan/rng.hpp"

namespace spectralkan {

namespace {

constexpr std::size_t kPredictChunk = 2048;

// Streams derived from the run seed.
constexpr std::uint64_t kInitStream = 100;
constexpr std::uint64_t kSplitStream = 101;
constexpr std::uint64_t kShuffleStream = 102;

std::uint64_t split_seed(std::uint64_t run_seed) { return derive_seed(run_seed, kSplitStream); }

std::vector<PixelCoord> known_pixels(const LabelMap& labels) {
  std::vector<PixelCoord> out;
  for (std::size_t r = 0; r < labels.height; ++r)
    for (std::size_t c = 0; c < labels.width; ++c)
      if (labels.at(r, c) != LabelMap::kUnknown) out.push_back({r, c});
  return out;
}

ConfusionMatrix score(const Model& model, const HsiCube& input, const LabelMap& labels,
                      std::span<const PixelCoord> coords) {
  const auto pred = predict_pixels(model, input, coords);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const std::uint8_t truth = labels.at(coords[i].row, coords[i].col);
    if (truth <= 1) cm.add(truth, pred[i]);
  }
  return cm;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& before, const std::filesystem::path& after,
                     const std::filesystem::path& labels) {
  Dataset data{load_cube(before), load_cube(after), load_label_map(labels)};
  if (data.before.height() != data.after.height() || data.before.width() != data.after.width() ||
      data.before.bands() != data.after.bands())
    throw ContractError("the two epochs have different dimensions");
  if (data.labels.height != data.before.height() || data.labels.width != data.before.width())
    throw ContractError("label map is " + std::to_string(data.labels.height) + "x" +
                        std::to_string(data.labels.width) + " but the cubes are " +
                        std::to_string(data.before.height()) + "x" +
                        std::to_string(data.before.width()));
  return data;
}

HsiCube prepare_input(const Dataset& data) { return normalize(difference(data.before, data.after)); }

std::vector<std::uint8_t> predict_pixels(const Model& model, const HsiCube& input,
                                         std::span<const PixelCoord> coords) {
  if (input.bands() != model.config().bands)
    throw ContractError("model expects " + std::to_string(model.config().bands) +
                        " bands but the data has " + std::to_string(input.bands()));
  // Labels are irrelevant here; a blank map satisfies make_patches.
  const LabelMap blank(input.height(), input.width(), LabelMap::kUnknown);
  std::vector<std::uint8_t> out;
  out.reserve(coords.size());
  for (std::size_t start = 0; start < coords.size(); start += kPredictChunk) {
    const std::size_t count = std::min(kPredictChunk, coords.size() - start);
    const PatchSet patches =
        make_patches(input, blank, coords.subspan(start, count), model.config().patch_size);
    const auto pred = predict(model, patches);
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

TrainOutcome run_training(const Dataset& data, const TrainOptions& options) {
  options.model.validate();
  options.train.validate();
  if (options.model.bands != data.before.bands())
    throw ContractError("config declares " + std::to_string(options.model.bands) +
                        " bands but the data has " + std::to_string(data.before.bands()));

  const HsiCube input = prepare_input(data);
  TrainOutcome outcome;
  outcome.split = stratified_split(data.labels, options.train_fraction, split_seed(options.seed));
  outcome.model = Model::build(options.model, derive_seed(options.seed, kInitStream));

  const PatchSet train_set =
      make_patches(input, data.labels, outcome.split.train, options.model.patch_size);
  TrainConfig train_config = options.train;
  train_config.seed = derive_seed(options.seed, kShuffleStream);
  outcome.history = train(outcome.model, train_set, train_config);
  outcome.test_confusion = score(outcome.model, input, data.labels, outcome.split.test);
  return outcome;
}

void write_training_outputs(const std::filesystem::path& dir, const TrainOutcome& outcome,
                            const TrainOptions& options) {
  std::filesystem::create_directories(dir);
  nlohmann::json metadata;
  metadata["seed"] = options.seed;
  metadata["train_fraction"] = options.train_fraction;
  metadata["input"] = "difference, per-band min-max to [-1, 1]";
  metadata["train"] = {{"epochs", options.train.epochs},
                       {"batch_size", options.train.batch_size},
                       {"base_lr", options.train.base_lr},
                       {"decay_factor", options.train.decay_factor},
                       {"decay_every", options.train.decay_every}};
  save_checkpoint(dir / "checkpoint.skan", outcome.model, metadata);
  outcome.history.write_csv(dir / "history.csv");
  write_json(dir / "metrics.json", metrics_report(outcome.test_confusion));
}

EvalOutcome run_evaluation(const Checkpoint& checkpoint, const Dataset& data, bool all_pixels) {
  const Model& model = checkpoint.model;
  if (data.before.bands() != model.config().bands)
    throw ContractError("checkpoint expects " + std::to_string(model.config().bands) +
                        " bands but the data has " + std::to_string(data.before.bands()));
  const auto known = known_pixels(data.labels);
  if (known.empty()) throw UndefinedMetricError("label map has no known pixels to evaluate");

  const HsiCube input = prepare_input(data);
  const auto pred = predict_pixels(model, input, known);

  EvalOutcome outcome;
  outcome.change_map.assign(data.labels.labels.size(), 128);
  for (std::size_t i = 0; i < known.size(); ++i)
    outcome.change_map[known[i].row * data.labels.width + known[i].col] =
        pred[i] == LabelMap::kChanged ? 255 : 0;

  std::vector<PixelCoord> scored;
  if (all_pixels) {
    scored = known;
  } else {
    const auto& meta = checkpoint.metadata;
    if (!meta.contains("seed") || !meta.contains("train_fraction"))
      throw ContractError("checkpoint has no split metadata; evaluate all pixels instead");
    const SplitSpec split =
        stratified_split(data.labels, meta["train_fraction"].get<double>(),
                         split_seed(meta["seed"].get<std::uint64_t>()));
    scored = split.test;
  }
  // Reuse the predictions already made for every known pixel.
  LabelMap pred_grid(data.labels.height, data.labels.width, LabelMap::kUnchanged);
  for (std::size_t i = 0; i < known.size(); ++i)
    pred_grid.at(known[i].row, known[i].col) = pred[i];
  LabelMap truth(data.labels.height, data.labels.width, LabelMap::kUnknown);
  for (const auto& p : scored) truth.at(p.row, p.col) = data.labels.at(p.row, p.col);
  outcome.confusion = accumulate(pred_grid.labels, truth);
  if (outcome.confusion.total() == 0)
    throw UndefinedMetricError("no pixels left to evaluate");
  return outcome;
}

void write_eval_outputs(const std::filesystem::path& dir, const EvalOutcome& outcome,
                        const LabelMap& labels) {
  std::filesystem::create_directories(dir);
  write_pgm(dir / "change_map.pgm", labels.width, labels.height, outcome.change_map);
  write_json(dir / "metrics.json", metrics_report(outcome.confusion));
}

nlohmann::json accounting_report(const Model& model) {
  nlohmann::json layers = nlohmann::json::array();
  auto add = [&](const std::vector<Layer>& stack, const char* name, std::uint64_t repeats) {
    for (std::size_t l = 0; l < stack.size(); ++l)
      layers.push_back({{"stack", name},
                        {"index", l},
                        {"kind", std::string(to_string(kind_of(stack[l])))},
                        {"d_in", d_in(stack[l])},
                        {"d_out", d_out(stack[l])},
                        {"params", param_count(stack[l])},
                        {"flops", flop_count(stack[l])},
                        {"flop_repeats", repeats}});
  };
  const auto& cfg = model.config();
  const bool ss = is_spatial_spectral(cfg.variant);
  add(model.spatial_stack(), "spatial", cfg.bands);
  add(model.head_stack(), ss ? "spectral" : "flat", 1);

  nlohmann::json report;
  report["variant"] = std::string(to_string(cfg.variant));
  report["patch_size"] = cfg.patch_size;
  report["bands"] = cfg.bands;
  report["layers"] = layers;
  report["total_params"] = model.total_params();
  report["total_flops"] = model.total_flops();
  return report;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::Open, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError(IoError::Kind::Write, "failed writing " + path.string());
}

}  // namespace spectralkan
