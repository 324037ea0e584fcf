#include "spectralkan/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "spectralkan/errors.hpp"
#include "spectralkan/rng.hpp"

namespace spectralkan {

namespace {

void check_patches(const Model& model, const PatchSet& data) {
  const auto& cfg = model.config();
  if (data.patch_size != cfg.patch_size || data.bands != cfg.bands)
    throw ContractError("patch set shape (" + std::to_string(data.patch_size) + ", " +
                        std::to_string(data.bands) + ") does not match model (" +
                        std::to_string(cfg.patch_size) + ", " + std::to_string(cfg.bands) + ")");
  if (data.patches.size() != data.size() * data.patch_values())
    throw ContractError("patch set storage does not match its label count");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ContractError("batch size must be at least 1");
  if (!(base_lr > 0.0)) throw ContractError("learning rate must be positive");
  if (!(decay_factor > 0.0)) throw ContractError("decay factor must be positive");
  if (decay_every == 0) throw ContractError("decay interval must be at least one epoch");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ContractError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ContractError("Adam epsilon must be positive");
}

AdamState AdamState::for_model(const Model& model) {
  AdamState state;
  for (const auto& p : model.parameters()) {
    state.m.emplace_back(p.values.size(), 0.0);
    state.v.emplace_back(p.values.size(), 0.0);
  }
  return state;
}

std::string TrainHistory::to_csv() const {
  const bool with_eval =
      std::any_of(epochs.begin(), epochs.end(), [](const auto& e) { return e.oa.has_value(); });
  std::string out = with_eval ? "epoch,lr,loss,oa,kappa\n" : "epoch,lr,loss\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + format_double(e.lr) + "," + format_double(e.loss);
    if (with_eval) {
      out += ",";
      if (e.oa) out += format_double(*e.oa);
      out += ",";
      if (e.kappa) out += format_double(*e.kappa);
    }
    out += "\n";
  }
  return out;
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::Open, "cannot open " + path.string() + " for writing");
  const std::string text = to_csv();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError(IoError::Kind::Write, "failed writing " + path.string());
}

LossAndGradient softmax_cross_entropy(const Matrix& logits, std::span<const std::uint8_t> labels) {
  if (logits.cols() != 2) throw ContractError("cross-entropy expects two logits per sample");
  if (labels.size() != logits.rows()) throw ContractError("label count does not match batch");
  if (logits.rows() == 0) throw ContractError("cross-entropy of an empty batch");
  const double n = static_cast<double>(logits.rows());
  LossAndGradient out;
  out.grad_logits = Matrix(logits.rows(), 2);
  double total = 0.0;
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    const std::uint8_t y = labels[b];
    if (y > 1) throw ContractError("cross-entropy label must be 0 or 1");
    const double top = std::max(logits(b, 0), logits(b, 1));
    const double e0 = std::exp(logits(b, 0) - top);
    const double e1 = std::exp(logits(b, 1) - top);
    const double log_z = std::log(e0 + e1);
    total += -(logits(b, y) - top - log_z);
    const double p[2] = {e0 / (e0 + e1), e1 / (e0 + e1)};
    for (std::size_t k = 0; k < 2; ++k)
      out.grad_logits(b, k) = (p[k] - (k == y ? 1.0 : 0.0)) / n;
  }
  out.loss = total / n;
  return out;
}

double lr_at(const TrainConfig& config, std::size_t epoch) {
  const auto steps = static_cast<double>(epoch / config.decay_every);
  return config.base_lr * std::pow(config.decay_factor, steps);
}

void adam_step(AdamState& state, std::span<const std::span<double>> params,
               const std::vector<std::vector<double>>& grads, double lr,
               const TrainConfig& config) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size())
    throw ContractError("Adam state, parameters and gradients disagree in tensor count");
  for (std::size_t t = 0; t < params.size(); ++t)
    if (params[t].size() != grads[t].size() || params[t].size() != state.m[t].size() ||
        params[t].size() != state.v[t].size())
      throw ContractError("Adam tensor " + std::to_string(t) + " has mismatched sizes");

  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double step = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(b1, step);
  const double correction2 = 1.0 - std::pow(b2, step);
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& m = state.m[t];
    auto& v = state.v[t];
    const auto& g = grads[t];
    auto p = params[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
  }
}

TrainHistory train(Model& model, const PatchSet& data, const TrainConfig& config,
                   EvalSchedule eval) {
  config.validate();
  if (data.size() == 0) throw ContractError("training set is empty");
  check_patches(model, data);
  if (eval.data) check_patches(model, *eval.data);

  AdamState state = AdamState::for_model(model);
  std::vector<std::span<double>> views;
  for (auto& p : model.parameters()) views.push_back(p.values);

  const std::size_t n = data.size();
  const std::size_t width = data.patch_values();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);

  std::vector<double> batch_patches;
  std::vector<std::uint8_t> batch_labels;
  TrainHistory history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    const double lr = lr_at(config, epoch);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      batch_patches.resize(count * width);
      batch_labels.resize(count);
      for (std::size_t k = 0; k < count; ++k) {
        const auto src = data.patch(order[start + k]);
        std::copy(src.begin(), src.end(), batch_patches.begin() + k * width);
        batch_labels[k] = data.labels[order[start + k]];
      }
      const ForwardTrace trace = model.forward_trace(batch_patches, count);
      const LossAndGradient lg = softmax_cross_entropy(trace.logits, batch_labels);
      const auto grads = model.backward(trace, lg.grad_logits);
      adam_step(state, views, grads, lr, config);
      loss_sum += lg.loss * static_cast<double>(count);
    }

    EpochRecord record{epoch, lr, loss_sum / static_cast<double>(n), std::nullopt, std::nullopt};
    const bool last = epoch + 1 == config.epochs;
    if (eval.data && eval.every > 0 && ((epoch + 1) % eval.every == 0 || last)) {
      const ConfusionMatrix cm = evaluate(model, *eval.data);
      if (cm.total() > 0) {
        record.oa = overall_accuracy(cm);
        record.kappa = kappa(cm);
      }
    }
    history.epochs.push_back(record);
  }
  return history;
}

double dataset_loss(const Model& model, const PatchSet& data) {
  check_patches(model, data);
  if (data.size() == 0) throw ContractError("loss of an empty patch set");
  const Matrix logits = model.forward(data.patches, data.size());
  return softmax_cross_entropy(logits, data.labels).loss;
}

std::vector<std::uint8_t> predict(const Model& model, const PatchSet& data, std::size_t chunk) {
  check_patches(model, data);
  if (chunk == 0) chunk = 1;
  std::vector<std::uint8_t> out;
  out.reserve(data.size());
  const std::size_t width = data.patch_values();
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t count = std::min(chunk, data.size() - start);
    const Matrix logits = model.forward(
        std::span<const double>(data.patches).subspan(start * width, count * width), count);
    for (std::size_t b = 0; b < count; ++b)
      out.push_back(logits(b, 1) > logits(b, 0) ? LabelMap::kChanged : LabelMap::kUnchanged);
  }
  return out;
}

ConfusionMatrix evaluate(const Model& model, const PatchSet& data) {
  const auto pred = predict(model, data);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.labels[i] <= 1) cm.add(data.labels[i], pred[i]);
  return cm;
}

double gradient_check(const Model& model, const PatchSet& batch, double step) {
  if (model.empty() || model.total_params() == 0) return 0.0;
  check_patches(model, batch);
  if (batch.size() == 0) throw ContractError("gradient check needs a non-empty batch");

  const ForwardTrace trace = model.forward_trace(batch.patches, batch.size());
  const LossAndGradient lg = softmax_cross_entropy(trace.logits, batch.labels);
  const auto analytic = model.backward(trace, lg.grad_logits);

  Model probe = model;
  auto params = probe.parameters();
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto values = params[t].values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double plus = dataset_loss(probe, batch);
      values[i] = saved - step;
      const double minus = dataset_loss(probe, batch);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[t][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradientCheckFloor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace spectralkan
