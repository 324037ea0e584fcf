#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "spectralkan/errors.hpp"
#include "spectralkan/model.hpp"
#include "support.hpp"

using namespace spectralkan;

namespace {

std::uint64_t params_for(Variant v, std::size_t bands) {
  return Model::zeros(ModelConfig::standard(v, bands)).total_params();
}

// Element-by-element evaluation of one shared KAN layer.
std::vector<double> shared_oracle(SharedKanLayer& layer, const std::vector<double>& x) {
  std::vector<double> out(layer.d_out(), 0.0);
  for (std::size_t j = 0; j < layer.d_out(); ++j)
    for (std::size_t i = 0; i < layer.d_in(); ++i) {
      const auto c = layer.coeffs(i);
      out[j] += oracle::kan_edge(layer.w_a(j, i), layer.w_b(j, i), {c.begin(), c.end()}, x[i]);
    }
  return out;
}

std::vector<double> full_oracle(FullKanLayer& layer, const std::vector<double>& x) {
  std::vector<double> out(layer.d_out(), 0.0);
  for (std::size_t j = 0; j < layer.d_out(); ++j)
    for (std::size_t i = 0; i < layer.d_in(); ++i) {
      const auto c = layer.coeffs(j, i);
      out[j] += oracle::kan_edge(layer.w_a(j, i), layer.w_b(j, i), {c.begin(), c.end()}, x[i]);
    }
  return out;
}

std::vector<double> dense_oracle(DenseLayer& layer, const std::vector<double>& x) {
  std::vector<double> out(layer.d_out());
  for (std::size_t j = 0; j < layer.d_out(); ++j) {
    double s = layer.bias(j);
    for (std::size_t i = 0; i < layer.d_in(); ++i) s += layer.weight(j, i) * x[i];
    out[j] = layer.has_activation() ? oracle::silu(s) : s;
  }
  return out;
}

std::vector<double> layer_oracle(Layer& layer, const std::vector<double>& x) {
  if (auto* s = std::get_if<SharedKanLayer>(&layer)) return shared_oracle(*s, x);
  if (auto* f = std::get_if<FullKanLayer>(&layer)) return full_oracle(*f, x);
  return dense_oracle(std::get<DenseLayer>(layer), x);
}

std::vector<double> stack_oracle(std::vector<Layer>& stack, std::vector<double> x) {
  for (auto& layer : stack) x = layer_oracle(layer, x);
  return x;
}

// Reshape one patch (row, col, band; band fastest) into per-band pixel rows,
// run the spatial stack on each band, then the spectral stack on z.
std::vector<double> model_oracle(Model& model, std::span<const double> patch) {
  const auto& cfg = model.config();
  const std::size_t pixels = cfg.patch_pixels();
  if (!is_spatial_spectral(cfg.variant))
    return stack_oracle(model.head_stack(), {patch.begin(), patch.end()});
  std::vector<double> z(cfg.bands);
  for (std::size_t band = 0; band < cfg.bands; ++band) {
    std::vector<double> row(pixels);
    for (std::size_t px = 0; px < pixels; ++px) row[px] = patch[px * cfg.bands + band];
    z[band] = stack_oracle(model.spatial_stack(), row).at(0);
  }
  return stack_oracle(model.head_stack(), z);
}

ModelConfig tiny_config(Variant v) {
  ModelConfig cfg = ModelConfig::standard(v, 2, 3);
  if (is_spatial_spectral(v)) {
    cfg.spatial_nodes = {9, 2, 1};
    cfg.spectral_nodes = {2, 2, 2};
  } else {
    cfg.flat_nodes = {18, 3, 2};
  }
  return cfg;
}

constexpr Variant kAllVariants[] = {Variant::Mlp,   Variant::MlpSs, Variant::Kan,
                                    Variant::KanEnc, Variant::KanSs, Variant::SpectralKan};

}  // namespace

TEST_CASE("variant names round-trip") {
  for (Variant v : kAllVariants) CHECK(parse_variant(to_string(v)) == v);
  CHECK(to_string(Variant::SpectralKan) == "spectral-kan");
  CHECK(to_string(Variant::MlpSs) == "mlp-ss");
  CHECK_FALSE(parse_variant("resnet").has_value());
  CHECK(layer_kind(Variant::Mlp) == LayerKind::Dense);
  CHECK(layer_kind(Variant::MlpSs) == LayerKind::Dense);
  CHECK(layer_kind(Variant::Kan) == LayerKind::FullKan);
  CHECK(layer_kind(Variant::KanSs) == LayerKind::FullKan);
  CHECK(layer_kind(Variant::KanEnc) == LayerKind::SharedKan);
  CHECK(layer_kind(Variant::SpectralKan) == LayerKind::SharedKan);
}

TEST_CASE("standard configurations") {
  const auto ss = ModelConfig::standard(Variant::SpectralKan, 155);
  CHECK(ss.patch_size == 5);
  CHECK(ss.spatial_nodes == std::vector<std::size_t>{25, 16, 1});
  CHECK(ss.spectral_nodes == std::vector<std::size_t>{155, 16, 2});
  CHECK(ss.flat_nodes.empty());
  const auto flat = ModelConfig::standard(Variant::Mlp, 155);
  CHECK(flat.flat_nodes == std::vector<std::size_t>{3875, 16, 2});
  CHECK(flat.spatial_nodes.empty());
}

TEST_CASE("build picks layer kinds and counts per variant") {
  Model ss = Model::build(ModelConfig::standard(Variant::SpectralKan, 155), 1);
  REQUIRE(ss.spatial_stack().size() == 2);
  REQUIRE(ss.head_stack().size() == 2);
  for (const auto* stack : {&ss.spatial_stack(), &ss.head_stack()})
    for (const auto& l : *stack) CHECK(kind_of(l) == LayerKind::SharedKan);
  CHECK(d_in(ss.spatial_stack()[0]) == 25);
  CHECK(d_out(ss.head_stack()[1]) == 2);

  Model mlp = Model::build(ModelConfig::standard(Variant::Mlp, 155), 1);
  CHECK(mlp.spatial_stack().empty());
  REQUIRE(mlp.head_stack().size() == 2);
  CHECK(kind_of(mlp.head_stack()[0]) == LayerKind::Dense);
  CHECK(std::get<DenseLayer>(mlp.head_stack()[0]).has_activation());
  CHECK_FALSE(std::get<DenseLayer>(mlp.head_stack()[1]).has_activation());

  Model mlp_ss = Model::build(ModelConfig::standard(Variant::MlpSs, 20), 1);
  for (const auto& l : mlp_ss.spatial_stack()) CHECK(std::get<DenseLayer>(l).has_activation());
  CHECK(std::get<DenseLayer>(mlp_ss.head_stack()[0]).has_activation());
  CHECK_FALSE(std::get<DenseLayer>(mlp_ss.head_stack()[1]).has_activation());
}

TEST_CASE("same seed rebuilds identical parameters") {
  for (Variant v : kAllVariants) {
    const auto cfg = ModelConfig::standard(v, 6, 3);
    const Model a = Model::build(cfg, 42);
    const Model b = Model::build(cfg, 42);
    const Model c = Model::build(cfg, 43);
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    const auto pc = c.parameters();
    bool any_diff = false;
    for (std::size_t t = 0; t < pa.size(); ++t) {
      CHECK(pa[t].name == pb[t].name);
      CHECK(std::equal(pa[t].values.begin(), pa[t].values.end(), pb[t].values.begin()));
      any_diff |= !std::equal(pa[t].values.begin(), pa[t].values.end(), pc[t].values.begin());
    }
    CHECK(any_diff);
  }
}

TEST_CASE("parameter names") {
  const Model ss = Model::build(ModelConfig::standard(Variant::SpectralKan, 4, 3), 0);
  std::vector<std::string> names;
  for (const auto& p : ss.parameters()) names.push_back(p.name);
  CHECK(names == std::vector<std::string>{"spatial.0.w_a", "spatial.0.w_b", "spatial.0.c_shared",
                                          "spatial.1.w_a", "spatial.1.w_b", "spatial.1.c_shared",
                                          "spectral.0.w_a", "spectral.0.w_b", "spectral.0.c_shared",
                                          "spectral.1.w_a", "spectral.1.w_b", "spectral.1.c_shared"});
  const Model mlp = Model::build(ModelConfig::standard(Variant::Mlp, 4, 3), 0);
  CHECK(mlp.parameters()[0].name == "flat.0.weights");
  CHECK(mlp.parameters()[1].name == "flat.0.bias");
}

TEST_CASE("config validation") {
  auto expect_reject = [](ModelConfig cfg) { CHECK_THROWS_AS(Model::build(cfg, 0), ContractError); };
  auto cfg = ModelConfig::standard(Variant::SpectralKan, 10);
  CHECK_NOTHROW(Model::build(cfg, 0));

  auto bad = cfg;
  bad.spatial_nodes = {24, 16, 1};
  expect_reject(bad);
  bad = cfg;
  bad.spatial_nodes = {25, 16, 2};
  expect_reject(bad);
  bad = cfg;
  bad.spectral_nodes = {11, 16, 2};
  expect_reject(bad);
  bad = cfg;
  bad.spectral_nodes = {10, 16, 3};
  expect_reject(bad);
  bad = cfg;
  bad.spectral_nodes = {10, 0, 2};
  expect_reject(bad);
  bad = cfg;
  bad.spatial_nodes = {25};
  expect_reject(bad);
  bad = cfg;
  bad.patch_size = 4;
  expect_reject(bad);
  bad = cfg;
  bad.flat_nodes = {250, 2};
  expect_reject(bad);

  auto flat = ModelConfig::standard(Variant::Kan, 10);
  flat.flat_nodes = {249, 16, 2};
  expect_reject(flat);
  flat = ModelConfig::standard(Variant::Kan, 10);
  flat.spatial_nodes = {25, 1};
  expect_reject(flat);

  // Node lists may take any depth as long as the ends fit.
  cfg.spatial_nodes = {25, 8, 4, 1};
  cfg.spectral_nodes = {10, 2};
  CHECK_NOTHROW(Model::build(cfg, 0));
}

TEST_CASE("zero model maps a zero patch to zero logits") {
  for (Variant v : kAllVariants) {
    const Model model = Model::zeros(ModelConfig::standard(v, 3, 3));
    const std::vector<double> patch(27, 0.0);
    const Matrix logits = model.forward(patch, 1);
    REQUIRE(logits.rows() == 1);
    REQUIRE(logits.cols() == 2);
    CHECK(logits(0, 0) == 0.0);
    CHECK(logits(0, 1) == 0.0);
  }
}

TEST_CASE("identical patches give identical logits") {
  for (Variant v : kAllVariants) {
    const Model model = Model::build(ModelConfig::standard(v, 3, 3), 5);
    const auto one = testing::random_values(27, 6);
    std::vector<double> batch;
    for (int n = 0; n < 4; ++n) batch.insert(batch.end(), one.begin(), one.end());
    const Matrix logits = model.forward(batch, 4);
    for (std::size_t n = 1; n < 4; ++n) {
      CHECK(logits(n, 0) == logits(0, 0));
      CHECK(logits(n, 1) == logits(0, 1));
    }
  }
}

TEST_CASE("forward matches a step-by-step composition for p = 3, b = 2") {
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    Model model = Model::build(tiny_config(v), 17);
    const auto patches = testing::random_values(3 * 18, 18);
    const Matrix logits = model.forward(patches, 3);
    for (std::size_t n = 0; n < 3; ++n) {
      const auto expected =
          model_oracle(model, std::span<const double>(patches).subspan(n * 18, 18));
      CHECK(logits(n, 0) == doctest::Approx(expected[0]).epsilon(1e-12));
      CHECK(logits(n, 1) == doctest::Approx(expected[1]).epsilon(1e-12));
    }
  }
}

TEST_CASE("spatial encoder is shared across bands") {
  const auto cfg = ModelConfig::standard(Variant::SpectralKan, 5, 3);
  const Model model = Model::build(cfg, 9);
  const auto patch = testing::random_values(cfg.patch_values(), 10);
  const std::size_t perm[5] = {3, 0, 4, 1, 2};
  std::vector<double> permuted(patch.size());
  for (std::size_t px = 0; px < 9; ++px)
    for (std::size_t b = 0; b < 5; ++b) permuted[px * 5 + b] = patch[px * 5 + perm[b]];
  const Matrix z = model.spatial_features(patch, 1);
  const Matrix zp = model.spatial_features(permuted, 1);
  for (std::size_t b = 0; b < 5; ++b) CHECK(zp(0, b) == z(0, perm[b]));
}

TEST_CASE("scaling the output layer does not change the argmax") {
  Model model = Model::build(ModelConfig::standard(Variant::SpectralKan, 4, 3), 12);
  const auto patches = testing::random_values(10 * 36, 13);
  const Matrix before = model.forward(patches, 10);
  for (auto& p : params(model.head_stack().back()))
    if (p.name != "c_shared")
      for (double& v : p.values) v *= 3.5;
  const Matrix after = model.forward(patches, 10);
  for (std::size_t n = 0; n < 10; ++n) {
    CHECK(after(n, 0) == doctest::Approx(3.5 * before(n, 0)).epsilon(1e-12));
    CHECK((after(n, 1) > after(n, 0)) == (before(n, 1) > before(n, 0)));
  }
}

TEST_CASE("forward contract checks") {
  const Model model = Model::build(ModelConfig::standard(Variant::SpectralKan, 4, 3), 0);
  CHECK_THROWS_AS(model.forward(std::vector<double>(35), 1), ContractError);
  CHECK_THROWS_AS(model.forward(std::vector<double>(36), 2), ContractError);
  const Model flat = Model::build(ModelConfig::standard(Variant::Kan, 4, 3), 0);
  CHECK_THROWS_AS(flat.spatial_features(std::vector<double>(36), 1), ContractError);
  CHECK_THROWS_AS(Model().forward(std::vector<double>(), 0), ContractError);
}

TEST_CASE("SpectralKAN parameter totals") {
  CHECK(params_for(Variant::SpectralKan, 155) == 7552);
  CHECK(params_for(Variant::SpectralKan, 198) == 9272);
  CHECK(params_for(Variant::SpectralKan, 154) == 7512);
  CHECK(params_for(Variant::SpectralKan, 224) == 10312);
  // 1000 + 160 + 6200 + 192
  const Model m = Model::zeros(ModelConfig::standard(Variant::SpectralKan, 155));
  CHECK(param_count(m.spatial_stack()[0]) == 1000);
  CHECK(param_count(m.spatial_stack()[1]) == 160);
  CHECK(param_count(m.head_stack()[0]) == 6200);
  CHECK(param_count(m.head_stack()[1]) == 192);
  CHECK(params_for(Variant::KanSs, 155) == 29280);
}

TEST_CASE("ablation parameter totals round to the published thousands") {
  const std::size_t bands[5] = {155, 198, 154, 224, 224};
  struct Row {
    Variant v;
    int k[5];
  };
  const Row table[] = {{Variant::Mlp, {62, 79, 62, 89, 89}},
                       {Variant::MlpSs, {3, 4, 3, 4, 4}},
                       {Variant::Kan, {620, 792, 616, 896, 896}},
                       {Variant::KanEnc, {155, 198, 154, 224, 224}},
                       {Variant::KanSs, {29, 36, 29, 40, 40}},
                       {Variant::SpectralKan, {8, 9, 8, 10, 10}}};
  for (const Row& row : table)
    for (int d = 0; d < 5; ++d) {
      const auto exact = params_for(row.v, bands[d]);
      CAPTURE(to_string(row.v));
      CAPTURE(bands[d]);
      CAPTURE(exact);
      if (row.v == Variant::Mlp && bands[d] == 224) {
        // 5600*16 + 16 + 16*2 + 2 = 89,650: the one published cell (89) that
        // no bias convention reproduces; the exact count is pinned instead.
        CHECK(exact == 89650);
        continue;
      }
      CHECK(std::llround(static_cast<double>(exact) / 1000.0) == row.k[d]);
    }
  CHECK(params_for(Variant::Mlp, 155) == 62050);
  CHECK(params_for(Variant::MlpSs, 155) == 2963);
  CHECK(params_for(Variant::Kan, 155) == 620320);
  CHECK(params_for(Variant::KanEnc, 155) == 155192);
}

TEST_CASE("parameter ordering and reduction ratios at 155 bands") {
  const double spectral = static_cast<double>(params_for(Variant::SpectralKan, 155));
  const double kan_ss = static_cast<double>(params_for(Variant::KanSs, 155));
  const double kan_enc = static_cast<double>(params_for(Variant::KanEnc, 155));
  const double kan = static_cast<double>(params_for(Variant::Kan, 155));
  CHECK(spectral < kan_ss);
  CHECK(kan_ss < kan_enc);
  CHECK(kan_enc < kan);
  // The shared encoder cuts parameters about four times.
  CHECK(kan / kan_enc == doctest::Approx(4.0).epsilon(0.05));
  CHECK(kan_ss / spectral == doctest::Approx(4.0).epsilon(0.05));
  // The spatial-spectral split cuts them more than twenty times.
  CHECK(kan / kan_ss > 20.0);
  CHECK(kan_enc / spectral > 20.0);
  CHECK(static_cast<double>(params_for(Variant::Mlp, 155)) /
            static_cast<double>(params_for(Variant::MlpSs, 155)) >
        20.0);
}

TEST_CASE("FLOP totals") {
  const Model ss = Model::zeros(ModelConfig::standard(Variant::SpectralKan, 155));
  CHECK(ss.total_flops() == 155 * (3300 + 1632) + (100 * 155 + 2 * 155 * 16) + (100 * 16 + 2 * 16 * 2));
  CHECK(ss.total_flops() == 786584);
  const Model kan = Model::zeros(ModelConfig::standard(Variant::Kan, 155));
  CHECK(kan.total_flops() == 102 * (3875 * 16 + 16 * 2));
  CHECK(kan.total_flops() == 6327264);
  CHECK(Model().total_flops() == 0);
  CHECK(Model().total_params() == 0);
}
