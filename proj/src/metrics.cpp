#include "spectralkan/metrics.hpp"

#include "spectralkan/errors.hpp"

namespace spectralkan {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (int t = 0; t < 2; ++t)
    for (int p = 0; p < 2; ++p) counts[t][p] += other.counts[t][p];
  return *this;
}

ConfusionMatrix accumulate(std::span<const std::uint8_t> predictions, const LabelMap& truth) {
  if (predictions.size() != truth.height * truth.width || truth.labels.size() != predictions.size())
    throw ContractError("prediction grid and label map dimensions differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::uint8_t t = truth.labels[i];
    if (t == LabelMap::kUnknown) continue;
    if (t > 1 || predictions[i] > 1)
      throw ContractError("labels must be 0 or 1 at evaluated pixels");
    cm.add(t, predictions[i]);
  }
  return cm;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw UndefinedMetricError("overall accuracy of an empty confusion matrix");
  return static_cast<double>(cm.counts[0][0] + cm.counts[1][1]) / static_cast<double>(total);
}

double kappa(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw UndefinedMetricError("kappa of an empty confusion matrix");
  const double n = static_cast<double>(total);
  const double p_o = static_cast<double>(cm.counts[0][0] + cm.counts[1][1]) / n;
  double p_e = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double row = static_cast<double>(cm.counts[k][0] + cm.counts[k][1]);
    const double col = static_cast<double>(cm.counts[0][k] + cm.counts[1][k]);
    p_e += row * col;
  }
  p_e /= n * n;
  if (p_e == 1.0) return 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

nlohmann::json metrics_report(const ConfusionMatrix& cm) {
  nlohmann::json j;
  j["oa"] = overall_accuracy(cm);
  j["kappa"] = kappa(cm);
  j["confusion"] = {{cm.counts[0][0], cm.counts[0][1]}, {cm.counts[1][0], cm.counts[1][1]}};
  j["evaluated_pixels"] = cm.total();
  return j;
}

}  // namespace spectralkan
