#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "halfvae/models.hpp"
#include "halfvae/train.hpp"
#include "support.hpp"

using namespace halfvae;
using namespace testing_support;

namespace {

const ArchitectureOptions kSmall{{5, 4}, Activation::tanh, 0.7};

struct Segment {
  const char* name;
  std::size_t begin, end;
};

std::vector<Segment> segments(const HalfVaeModel& m) {
  const std::size_t n = m.n(), l = m.l();
  const std::size_t dec = m.decoder.parameter_count();
  return {{"z_mu", 0, n * l},
          {"z_rho", n * l, n * l + n},
          {"decoder", n * l + n, n * l + n + dec},
          {"priors", n * l + n + dec, parameter_count(m)}};
}

std::vector<Segment> segments(const VaeModel& m) {
  const std::size_t enc = m.encoder.parameter_count(), dec = m.decoder.parameter_count();
  std::vector<Segment> s{{"encoder", 0, enc}, {"decoder", enc, enc + dec}};
  if (m.prior_kind == PriorKind::gmm) s.push_back({"priors", enc + dec, parameter_count(m)});
  return s;
}

template <class Model>
void check_gradients(const Model& model, const Matrix& x, std::size_t samples, Rng& rng) {
  const auto noise = draw_noise(samples, model.n(), x.cols(), rng);
  const auto f = loss_function(model, x, noise);
  const auto point = flatten(model);
  for (const auto& seg : segments(model)) {
    auto g = restrict(f, point, seg.begin, seg.end);
    std::vector<double> sub(point.begin() + seg.begin, point.begin() + seg.end);
    EXPECT_LE(grad_check(g, sub), 1e-4) << seg.name;
  }
}

}  // namespace

TEST(InitHalfVae, DeterministicWithUniformPriorWeights) {
  const auto a = init_half_vae(3, 3, 500, 3, 7);
  const auto b = init_half_vae(3, 3, 500, 3, 7);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.priors.size(), 3u);
  for (const auto& p : a.priors) {
    ASSERT_EQ(p.components(), 3u);
    for (double w : gmm_constrain(p).weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  }
  EXPECT_NE(a, init_half_vae(3, 3, 500, 3, 8));
}

TEST(InitHalfVae, UnderdeterminedRejected) {
  EXPECT_THROW(init_half_vae(3, 2, 500, 3, 7), UnderdeterminedError);
  EXPECT_THROW(init_vae(3, 2, 3, 7, PriorKind::gmm), UnderdeterminedError);
}

TEST(ParameterCensus, HalfVaeAndVae) {
  const std::size_t n = 3, m = 4, l = 50, k = 3;
  const auto h = init_half_vae(n, m, l, k, 1);
  EXPECT_EQ(parameter_count(h), n * l + n + h.decoder.parameter_count() + n * 3 * k);
  EXPECT_EQ(flatten(h).size(), parameter_count(h));
  const auto v = init_vae(n, m, k, 1, PriorKind::gmm);
  EXPECT_EQ(parameter_count(v), parameter_count(h) + v.encoder.parameter_count() - n * l - n);
  EXPECT_EQ(v.encoder.out_dim(), 2 * n);
  const auto vanilla = init_vae(n, m, k, 1, PriorKind::standard_normal);
  EXPECT_EQ(parameter_count(vanilla), v.encoder.parameter_count() + v.decoder.parameter_count());
}

TEST(Flatten, AssignRoundTrip) {
  Rng rng(1);
  auto h = init_half_vae(2, 3, 10, 2, 3, kSmall);
  perturb_priors(h, rng);
  auto h2 = init_half_vae(2, 3, 10, 2, 4, kSmall);
  assign(h2, flatten(h));
  EXPECT_EQ(h, h2);
  auto v = init_vae(2, 3, 2, 3, PriorKind::gmm, kSmall);
  auto v2 = init_vae(2, 3, 2, 5, PriorKind::gmm, kSmall);
  assign(v2, flatten(v));
  EXPECT_EQ(v, v2);
  EXPECT_THROW(assign(v2, std::vector<double>(3)), ShapeError);
}

TEST(HalfVaeLoss, ZeroLambdaIsReconstructionOnly) {
  Rng rng(2);
  auto m = init_half_vae(2, 3, 12, 3, 1, kSmall);
  m.lambda = 0.0;
  const Matrix x = random_matrix(3, 12, rng);
  const auto r = half_vae_loss(m, x, 4, rng, false);
  EXPECT_GT(r.kl, 0.0);
  EXPECT_EQ(r.loss, r.reconstruction);
}

TEST(HalfVaeLoss, PerfectPreimageGivesNearZeroLoss) {
  Rng rng(3);
  auto m = init_half_vae(3, 3, 20, 2, 1, {{}, Activation::identity, 0.0});
  m.decoder.layers[0].weight = Matrix::identity(3);
  const Matrix x = random_matrix(3, 20, rng);
  m.bank.z_mu = x;
  m.bank.z_rho.assign(3, -60.0);  // spread at the floor
  const auto r = half_vae_loss(m, x, 8, rng, false);
  EXPECT_LT(r.loss, 1e-9);
}

TEST(HalfVaeLoss, SharedSpreadAndNoiseLayout) {
  // Identity decoder: reconstruction = (1/S) sum_s 0.5 ||X - (mu + sigma_i eps)||^2,
  // with eps for entry (i, l, s) at index (i*L + l)*S + s.
  Rng rng(4);
  const std::size_t n = 2, l = 5, s = 3;
  auto m = init_half_vae(n, n, l, 1, 1, {{}, Activation::identity, 1.0});
  m.decoder.layers[0].weight = Matrix::identity(n);
  m.bank.z_rho = {raw_from_spread(0.4), raw_from_spread(1.3)};
  const Matrix x = random_matrix(n, l, rng);
  const auto noise = draw_noise(s, n, l, rng);
  double expected = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < l; ++c)
      for (std::size_t k = 0; k < s; ++k) {
        const double z = m.bank.z_mu(i, c) + m.bank.sigma(i) * noise[(i * l + c) * s + k];
        expected += 0.5 * (x(i, c) - z) * (x(i, c) - z) / s;
      }
  EXPECT_NEAR(half_vae_loss(m, x, noise, false).reconstruction, expected, 1e-12);
}

TEST(HalfVaeLoss, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed + 100);
    auto m = init_half_vae(2, 3, 6, 2, seed, kSmall);
    perturb_priors(m, rng);
    check_gradients(m, random_matrix(3, 6, rng), 3, rng);
  }
}

TEST(VaeLoss, GradientsMatchFiniteDifferences) {
  for (PriorKind kind : {PriorKind::gmm, PriorKind::standard_normal}) {
    for (std::uint64_t seed : {1u, 2u}) {
      Rng rng(seed + 200);
      auto m = init_vae(2, 3, 2, seed, kind, kSmall);
      perturb_priors(m, rng);
      check_gradients(m, random_matrix(3, 6, rng), 3, rng);
    }
  }
}

TEST(VaeLoss, ZeroLambdaIsReconstructionOnly) {
  Rng rng(5);
  auto m = init_vae(2, 3, 2, 1, PriorKind::gmm, kSmall);
  m.lambda = 0.0;
  const auto r = vae_loss(m, random_matrix(3, 8, rng), 4, rng, false);
  EXPECT_EQ(r.loss, r.reconstruction);
}

TEST(VaeLoss, VanillaStandardPosteriorHasZeroKl) {
  Rng rng(6);
  auto m = init_vae(2, 3, 2, 1, PriorKind::standard_normal, kSmall);
  auto& last = m.encoder.layers.back();
  last.weight = Matrix(last.weight.rows(), last.weight.cols());
  last.bias = {0.0, 0.0, raw_from_spread(1.0), raw_from_spread(1.0)};
  const auto r = vae_loss(m, random_matrix(3, 10, rng), 2, rng, false);
  EXPECT_NEAR(r.kl, 0.0, 1e-12);
}

TEST(Loss, KlDecomposesOverComponents) {
  Rng rng(7);
  auto m = init_half_vae(3, 3, 15, 3, 2, kSmall);
  perturb_priors(m, rng);
  const Matrix x = random_matrix(3, 15, rng);
  const std::size_t s = 4;
  const auto noise = draw_noise(s, 3, 15, rng);
  const auto r = half_vae_loss(m, x, noise, false);
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    GmmEvaluator eval(m.priors[i]);
    double row = 0.0;
    for (std::size_t c = 0; c < 15; ++c) {
      row += kl_gauss_gmm_frozen(m.bank.z_mu(i, c), m.bank.sigma(i), eval,
                                 std::span<const double>(noise).subspan((i * 15 + c) * s, s));
    }
    EXPECT_EQ(r.kl_per_component[i], row);
    total += row;
  }
  EXPECT_EQ(r.kl, total);
}

TEST(Loss, ShapeAndNumericErrors) {
  Rng rng(8);
  const auto m = init_half_vae(2, 3, 6, 2, 1, kSmall);
  EXPECT_THROW(half_vae_loss(m, Matrix(3, 7), 2, rng), ShapeError);
  Matrix bad = random_matrix(3, 6, rng);
  bad(0, 0) = NAN;
  try {
    half_vae_loss(m, bad, 2, rng);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("reconstruction"), std::string::npos);
  }
}

TEST(PosteriorSummary, BandExamples) {
  LatentBank bank{Matrix(2, 4), {-80.0, raw_from_spread(1.0)}};
  const auto s = posterior_summary(bank);
  EXPECT_NEAR(s.upper95(0, 0) - s.lower95(0, 0), 2.0 * kZ95 * kSpreadFloor, 1e-12);
  EXPECT_NEAR(s.lower95(1, 2), -1.96, 1e-4);
  EXPECT_NEAR(s.upper95(1, 2), 1.96, 1e-4);

  Rng rng(9);
  const auto m = init_half_vae(3, 3, 30, 2, 4);
  const auto r = posterior_summary(m.bank);
  for (std::size_t i = 0; i < r.means.size(); ++i) {
    EXPECT_LE(r.lower95.flat()[i], r.means.flat()[i]);
    EXPECT_LE(r.means.flat()[i], r.upper95.flat()[i]);
  }
  const auto v = init_vae(2, 3, 2, 1, PriorKind::gmm, kSmall);
  const auto rv = posterior_summary(v, random_matrix(3, 10, rng));
  for (std::size_t i = 0; i < rv.means.size(); ++i) EXPECT_LT(rv.lower95.flat()[i], rv.upper95.flat()[i]);
}

TEST(Train, WarmupRamp) {
  TrainOptions o;
  o.epochs = 100;
  o.warmup_fraction = 0.1;
  EXPECT_EQ(kl_weight_at(0, 2.0, o), 0.0);
  EXPECT_DOUBLE_EQ(kl_weight_at(5, 2.0, o), 1.0);
  EXPECT_EQ(kl_weight_at(10, 2.0, o), 2.0);
  EXPECT_EQ(kl_weight_at(99, 2.0, o), 2.0);
  o.warmup_fraction = 0.0;
  EXPECT_EQ(kl_weight_at(0, 2.0, o), 2.0);
}

TEST(Train, LossDecreasesOver200Steps) {
  Rng rng(10);
  auto m = init_half_vae(3, 3, 100, 3, 1, {{16, 16}, Activation::tanh, 0.3});
  const Matrix x = random_matrix(3, 100, rng);
  TrainOptions o;
  o.epochs = 200;
  o.seed = 1;
  o.eval_samples = 256;
  o.warmup_fraction = 0.0;
  Rng e0(1, 8);
  const double before = estimate_loss(m, x, 256, e0).loss;
  const auto r = train(m, x, o);
  EXPECT_EQ(r.curve.size(), 200u);
  EXPECT_EQ(r.steps, 200u);
  EXPECT_LT(r.final_eval.loss, before);
  EXPECT_LT(r.curve.back().loss, r.curve.front().loss);
}

TEST(Train, SnapshotsAndDeterminism) {
  Rng rng(11);
  const Matrix x = random_matrix(3, 20, rng);
  TrainOptions o;
  o.epochs = 9;
  o.seed = 4;
  o.eval_samples = 16;
  o.snapshot_every = 3;
  auto a = init_vae(2, 3, 2, 1, PriorKind::gmm, kSmall);
  auto b = a;
  std::vector<std::size_t> epochs;
  const auto ra = train<VaeModel>(a, x, o, [&](std::size_t e, const VaeModel&) { epochs.push_back(e); });
  const auto rb = train(b, x, o);
  EXPECT_EQ(epochs, (std::vector<std::size_t>{3, 6, 9}));
  EXPECT_EQ(a, b);
  EXPECT_EQ(ra.final_eval.loss, rb.final_eval.loss);
}

TEST(Train, RejectsZeroEpochs) {
  auto m = init_half_vae(2, 3, 5, 2, 1, kSmall);
  TrainOptions o;
  o.epochs = 0;
  EXPECT_THROW(train(m, Matrix(3, 5), o), ConfigError);
}
