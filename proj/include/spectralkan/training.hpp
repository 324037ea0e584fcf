#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spectralkan/data.hpp"
#include "spectralkan/matrix.hpp"
#include "spectralkan/metrics.hpp"
#include "spectralkan/model.hpp"

namespace spectralkan {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double base_lr = 0.001;
  double decay_factor = 0.9;
  std::size_t decay_every = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  /// Throws ContractError for non-positive rates or a zero batch size.
  void validate() const;
};

/// First and second moments for every parameter tensor of a model.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static AdamState for_model(const Model& model);
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::optional<double> oa;
  std::optional<double> kappa;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  /// Header "epoch,lr,loss" plus ",oa,kappa" when any epoch was evaluated.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct LossAndGradient {
  double loss = 0.0;
  Matrix grad_logits;
};

/// Mean negative log-softmax of the true class over a batch x 2 logit matrix,
/// with gradient (softmax - one_hot) / batch. Throws ContractError for labels
/// other than 0 or 1 or a row count mismatch.
LossAndGradient softmax_cross_entropy(const Matrix& logits, std::span<const std::uint8_t> labels);

/// base_lr * decay_factor ^ floor(epoch / decay_every).
double lr_at(const TrainConfig& config, std::size_t epoch);

/// One bias-corrected Adam update of every tensor in `params`.
void adam_step(AdamState& state, std::span<const std::span<double>> params,
               const std::vector<std::vector<double>>& grads, double lr,
               const TrainConfig& config);

/// Optional held-out set scored every `every` epochs (and after the last).
struct EvalSchedule {
  const PatchSet* data = nullptr;
  std::size_t every = 0;
};

/// Mini-batch training in place: per-epoch reshuffle from config.seed,
/// forward -> loss -> backward -> Adam. The final partial batch is kept.
/// Throws ContractError for an empty training set or mismatched patches.
TrainHistory train(Model& model, const PatchSet& data, const TrainConfig& config,
                   EvalSchedule eval = {});

/// Mean cross-entropy of the model over a labeled patch set.
double dataset_loss(const Model& model, const PatchSet& data);

/// Argmax labels (ties go to "unchanged"), evaluated in chunks.
std::vector<std::uint8_t> predict(const Model& model, const PatchSet& data,
                                  std::size_t chunk = 512);

/// Confusion matrix of predictions against labels, skipping unknown labels.
ConfusionMatrix evaluate(const Model& model, const PatchSet& data);

/// Relative errors are |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline constexpr double kGradientCheckFloor = 1e-5;

/// Worst relative error between analytic gradients of the mean loss on
/// `batch` and central differences with the given step, over every scalar
/// parameter. Returns 0 for a model without parameters.
double gradient_check(const Model& model, const PatchSet& batch, double step = 1e-5);

}  // namespace spectralkan
