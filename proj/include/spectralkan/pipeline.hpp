#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "spectralkan/checkpoint.hpp"
#include "spectralkan/data.hpp"
#include "spectralkan/metrics.hpp"
#include "spectralkan/model.hpp"
#include "spectralkan/training.hpp"

namespace spectralkan {

/// Bi-temporal scene plus ground truth as read from disk.
struct Dataset {
  HsiCube before;
  HsiCube after;
  LabelMap labels;
};

/// Loads both cubes and the label PGM; throws IoError or ContractError when
/// dimensions disagree.
Dataset load_dataset(const std::filesystem::path& before, const std::filesystem::path& after,
                     const std::filesystem::path& labels);

/// Network input: per-band normalized difference map.
HsiCube prepare_input(const Dataset& data);

struct TrainOptions {
  ModelConfig model;
  TrainConfig train;
  double train_fraction = 0.01;
  std::uint64_t seed = 0;
};

struct TrainOutcome {
  Model model;
  TrainHistory history;
  SplitSpec split;
  ConfusionMatrix test_confusion;
};

/// difference -> normalize -> stratified split -> patches -> train -> test
/// evaluation. The run seed fans out to model init, split and shuffling.
/// Throws ContractError before any training when config and data disagree.
TrainOutcome run_training(const Dataset& data, const TrainOptions& options);

/// Writes checkpoint.skan, history.csv and metrics.json into `dir`.
void write_training_outputs(const std::filesystem::path& dir, const TrainOutcome& outcome,
                            const TrainOptions& options);

/// Predictions for the given pixels, extracted and scored in chunks.
std::vector<std::uint8_t> predict_pixels(const Model& model, const HsiCube& input,
                                         std::span<const PixelCoord> coords);

struct EvalOutcome {
  /// 0 unchanged, 255 changed, 128 unknown ground truth.
  std::vector<std::uint8_t> change_map;
  ConfusionMatrix confusion;
};

/// Predicts every known-label pixel. Metrics cover the checkpoint's test split
/// unless `all_pixels` is set. Throws ContractError on a band mismatch and
/// UndefinedMetricError when nothing can be evaluated.
EvalOutcome run_evaluation(const Checkpoint& checkpoint, const Dataset& data,
                           bool all_pixels = false);

/// Writes change_map.pgm and metrics.json into `dir`.
void write_eval_outputs(const std::filesystem::path& dir, const EvalOutcome& outcome,
                        const LabelMap& labels);

/// Per-layer and total parameter/FLOP accounting.
nlohmann::json accounting_report(const Model& model);

/// Deterministic pretty JSON text with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace spectralkan
