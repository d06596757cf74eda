#include "hardid/material_model.hpp"
#include "hardid/models.hpp"

#include "fd_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace hardid;

namespace {

MaterialParamsd drawParams(Rng& rng) {
  return {rng.uniform(10, 1000), rng.uniform(10, 1000), rng.uniform(5, 500), rng.uniform(5, 500)};
}

Vector4d drawVector(Rng& rng, double lo, double hi) {
  return Vector4d::NullaryExpr([&] { return rng.uniform(lo, hi); });
}

// Packs (logits, mean1, logsig1, mean2, logsig2) into 18 numbers.
MixtureOutput unpackMixture(const VectorXd& v) {
  return MixtureOutput::fromRaw(v.head<2>(), v.segment<4>(2), v.segment<4>(6), v.segment<4>(10),
                                v.segment<4>(14));
}

// A small-grid model whose input standardization and output scaling come
// from a handful of training samples.
struct SmallProblem {
  StrainGridd grid{0.0, 0.1, 3};
  MatrixXd curves;
  MatrixXd params;

  explicit SmallProblem(std::uint64_t seed, int count = 4) : curves(3, count), params(4, count) {
    Rng rng(seed);
    for (int j = 0; j < count; ++j) {
      const auto p = drawParams(rng);
      params.col(j) = p.vec();
      curves.col(j) = evaluateCurve(grid, p).values;
    }
  }
};

VectorXd flattenBlocks(const InverseModel& m) {
  std::vector<double> all;
  for (const auto* b : m.paramBlocks()) {
    const VectorXd f = b->flatten();
    all.insert(all.end(), f.begin(), f.end());
  }
  return Eigen::Map<VectorXd>(all.data(), Eigen::Index(all.size()));
}

void unflattenBlocks(InverseModel& m, const VectorXd& flat) {
  Eigen::Index at = 0;
  for (auto* b : m.paramBlocks()) {
    b->unflatten(flat.segment(at, b->size()));
    at += b->size();
  }
}

}  // namespace

TEST_CASE("model kinds by name") {
  CHECK(parseModelKind("good") == ModelKind::Good);
  CHECK(kindName(ModelKind::Ugly) == "ugly");
  CHECK_THROWS_AS(parseModelKind("Bad"), std::invalid_argument);
}

TEST_CASE("squared parameter error") {
  const Vector4d a(1, 2, 3, 4), b(1, 0, 3, 5);
  const auto l = lossMse(a, b);
  CHECK(l.value == 5.0);
  CHECK(l.grad == Vector4d(0, 4, 0, -2));
  CHECK(lossMse(a, a).value == 0.0);
  // A permuted label costs something whenever the branches differ.
  const MaterialParamsd p(300, 20, 40, 7);
  CHECK(lossMse(permute(p).vec(), p.vec()).value > 0.0);
}

TEST_CASE("curve mismatch loss examples") {
  const StrainGridd grid;
  const MaterialParamsd p(400, 30, 12, 250);
  CHECK(lossForward(p.vec(), p, grid).value == 0.0);
  CHECK(lossForward(permute(p).vec(), p, grid).value < 1e-18 * evaluateCurve(grid, p).values.squaredNorm());
  CHECK(lossForward(Vector4d(-p.vec()), p, grid).value == 0.0);

  // Grid {0, 1}: R vanishes at 0, so the loss is (R(1, target) - R(1, pred))^2.
  const StrainGridd one(0.0, 1.0, 2);
  const MaterialParamsd target(2, 3, 1, 2), pred(1, 3, 1, 2);
  const double gap = hardeningStress(1.0, target) - hardeningStress(1.0, pred);
  CHECK(lossForward(pred.vec(), target, one).value == doctest::Approx(gap * gap).epsilon(1e-15));
}

TEST_CASE("curve mismatch loss is blind to sign flips") {
  const StrainGridd grid;
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = drawParams(rng);
    Vector4d guess = drawVector(rng, -800, 800);
    const double loss = lossForward(guess, p, grid).value;
    for (int mask = 1; mask < 16; ++mask) {
      Vector4d flipped = guess;
      for (int j = 0; j < 4; ++j) {
        if (mask & (1 << j)) flipped[j] = -flipped[j];
      }
      CHECK(lossForward(flipped, p, grid).value == loss);
    }
  }
}

TEST_CASE("curve mismatch loss gradient") {
  const StrainGridd grid;
  Rng rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = drawParams(rng);
    Vector4d guess = drawParams(rng).vec();
    for (int j = 0; j < 4; ++j) {
      if (rng.uniform() < 0.5) guess[j] = -guess[j];
    }
    const auto analytic = lossForward(guess, p, grid).grad;
    const auto numeric = testing::centralDifference(
        [&](const VectorXd& x) { return lossForward(Vector4d(x), p, grid).value; }, VectorXd(guess));
    CHECK(testing::relativeError(analytic, numeric) < 1e-5);
  }
  // At an exact zero the |.| subgradient is taken as 0.
  const Vector4d at_zero(0.0, 50.0, 20.0, 30.0);
  CHECK(lossForward(at_zero, MaterialParamsd(100, 50, 20, 30), grid).grad[0] == 0.0);
}

TEST_CASE("mixture negative log-likelihood") {
  const double inf = std::numeric_limits<double>::infinity();
  const Vector4d target(0.3, -1.2, 2.0, 0.5);

  SUBCASE("one effective standard component at its mean") {
    const auto out = MixtureOutput::fromRaw(Eigen::Vector2d(0.0, -inf), target, Vector4d::Zero(),
                                            Vector4d(9, 9, 9, 9), Vector4d::Zero());
    CHECK(out.gate_probs == Eigen::Vector2d(1.0, 0.0));
    const auto l = lossMdnNll(out, target);
    CHECK(l.value == doctest::Approx(3.67575413281869097).epsilon(1e-14));
    CHECK(l.d_means[0].isZero());
    CHECK(l.d_means[1].isZero());
  }

  SUBCASE("identical components collapse to one") {
    const Vector4d mu(0.1, -1.0, 1.5, 0.0), ls(0.2, -0.3, 0.1, 0.5);
    const double single =
        lossMdnNll(MixtureOutput::fromRaw(Eigen::Vector2d(0.0, -inf), mu, ls, mu, ls), target).value;
    for (double logit : {-3.0, 0.0, 0.7, 5.0}) {
      const auto out = MixtureOutput::fromRaw(Eigen::Vector2d(logit, 0.0), mu, ls, mu, ls);
      CHECK(lossMdnNll(out, target).value == doctest::Approx(single).epsilon(1e-13));
    }
  }

  SUBCASE("gate and clamp") {
    const auto even = MixtureOutput::fromRaw(Eigen::Vector2d(1.5, 1.5), target, Vector4d::Zero(),
                                             target, Vector4d::Zero());
    CHECK(even.gate_probs == Eigen::Vector2d(0.5, 0.5));
    const auto clamped = MixtureOutput::fromRaw(Eigen::Vector2d(0, 0), target, Vector4d(20, -20, 0, 0),
                                                target, Vector4d::Zero());
    CHECK(clamped.log_sigmas[0] == Vector4d(10, -10, 0, 0));
    CHECK((clamped.sigmas[0].array() > 0.0).all());
  }

  SUBCASE("far-out targets stay finite") {
    const auto out = MixtureOutput::fromRaw(Eigen::Vector2d(0, 0), Vector4d::Zero(), Vector4d::Constant(-10),
                                            Vector4d::Constant(1), Vector4d::Constant(-10));
    const auto l = lossMdnNll(out, Vector4d::Constant(100));
    CHECK(std::isfinite(l.value));
    CHECK(l.d_logits.allFinite());
    CHECK(l.d_means[0].allFinite());
    CHECK(l.d_log_sigmas[1].allFinite());
  }

  SUBCASE("gradients against finite differences") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
      VectorXd v(18);
      for (auto& x : v) x = rng.uniform(-1.5, 1.5);
      const Vector4d t = drawVector(rng, -2, 2);
      const auto l = lossMdnNll(unpackMixture(v), t);
      VectorXd analytic(18);
      analytic << l.d_logits, l.d_means[0], l.d_log_sigmas[0], l.d_means[1], l.d_log_sigmas[1];
      const auto numeric = testing::centralDifference(
          [&](const VectorXd& x) { return lossMdnNll(unpackMixture(x), t).value; }, v);
      CHECK(testing::relativeError(analytic, numeric) < 1e-5);
    }
  }
}

TEST_CASE("model construction") {
  const StrainGridd grid;
  const MatrixXd curves = MatrixXd::Random(20, 8), params = MatrixXd::Random(4, 8).cwiseAbs();
  CHECK(InverseModel::init(ModelKind::Bad, grid, curves, params, 0).countParams() == 754);
  CHECK(InverseModel::init(ModelKind::Good, grid, curves, params, 0).countParams() == 754);
  CHECK(InverseModel::init(ModelKind::Ugly, grid, curves, params, 0).countParams() == 1988);
  CHECK(InverseModel::init(ModelKind::Ugly, grid, curves, params, 0).paramBlocks().size() == 3);
  CHECK_THROWS_AS(InverseModel::init(ModelKind::Bad, grid, MatrixXd::Zero(19, 8), params, 0),
                  std::invalid_argument);
  // Same seed, same weights; Bad and Good share the initial network.
  const auto a = InverseModel::init(ModelKind::Bad, grid, curves, params, 4);
  const auto b = InverseModel::init(ModelKind::Good, grid, curves, params, 4);
  CHECK(flattenBlocks(a) == flattenBlocks(b));
  CHECK(flattenBlocks(a) != flattenBlocks(InverseModel::init(ModelKind::Bad, grid, curves, params, 5)));
}

TEST_CASE("batch gradients through the whole model") {
  for (ModelKind kind : kAllModelKinds) {
    CAPTURE(kindName(kind));
    const SmallProblem prob(40);
    InverseModel model = InverseModel::init(kind, prob.grid, prob.curves, prob.params, 6);
    std::vector<NetParams<double>> grads;
    for (const auto* b : model.paramBlocks()) grads.push_back(NetParams<double>::zerosLike(*b));
    const double value = batchLossAndGradient(model, prob.curves, prob.params, grads);
    CHECK(std::isfinite(value));

    std::vector<double> all;
    for (const auto& g : grads) {
      const VectorXd f = g.flatten();
      all.insert(all.end(), f.begin(), f.end());
    }
    const VectorXd analytic = Eigen::Map<VectorXd>(all.data(), Eigen::Index(all.size()));
    const auto numeric = testing::centralDifference(
        [&](const VectorXd& flat) {
          InverseModel probe = model;
          unflattenBlocks(probe, flat);
          std::vector<NetParams<double>> scratch;
          for (const auto* b : probe.paramBlocks()) scratch.push_back(NetParams<double>::zerosLike(*b));
          return batchLossAndGradient(probe, prob.curves, prob.params, scratch);
        },
        flattenBlocks(model));
    CHECK(testing::relativeError(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("prediction rules") {
  const SmallProblem prob(41);
  const Standardizer<double> unit_out = Standardizer<double>::identity(4);

  SUBCASE("good returns magnitudes, bad returns raw outputs") {
    InverseModel model = InverseModel::init(ModelKind::Good, prob.grid, prob.curves, prob.params, 1);
    model.output = unit_out;
    auto& net = std::get<DenseNetd>(model.network);
    net.params().weights.back().setZero();
    net.params().biases.back() << -1.5, 2.0, -3.0, 4.0;
    CHECK(predictBatch(model, prob.curves).col(0) == Vector4d(1.5, 2.0, 3.0, 4.0));
    model.kind = ModelKind::Bad;
    CHECK(predictBatch(model, prob.curves).col(0) == Vector4d(-1.5, 2.0, -3.0, 4.0));
  }

  SUBCASE("ugly picks the expert with the larger gate, expert 1 on ties") {
    InverseModel model = InverseModel::init(ModelKind::Ugly, prob.grid, prob.curves, prob.params, 1);
    model.output = unit_out;
    auto& moe = std::get<MoeNet>(model.network);
    moe.expert1.params().weights.back().setZero();
    moe.expert2.params().weights.back().setZero();
    moe.gate.params().weights.back().setZero();
    moe.expert1.params().biases.back() << 1, 2, 3, 4, 0, 0, 0, 0;
    moe.expert2.params().biases.back() << 5, 6, 7, 8, 0, 0, 0, 0;
    const double logit = std::log(9.0);  // gate (0.9, 0.1)
    moe.gate.params().biases.back() << logit, 0.0;
    CHECK(predictBatch(model, prob.curves).col(0) == Vector4d(1, 2, 3, 4));
    moe.gate.params().biases.back() << 0.0, logit;
    CHECK(predictBatch(model, prob.curves).col(0) == Vector4d(5, 6, 7, 8));
    moe.gate.params().biases.back() << 0.3, 0.3;
    CHECK(predictBatch(model, prob.curves).col(0) == Vector4d(1, 2, 3, 4));
  }

  SUBCASE("curves must match the model grid") {
    const InverseModel model = InverseModel::init(ModelKind::Bad, prob.grid, prob.curves, prob.params, 1);
    CHECK_THROWS_AS(predictBatch(model, MatrixXd::Zero(4, 1)), std::invalid_argument);
    const StressCurved other{VectorXd::Zero(3), StrainGridd(0.0, 0.2, 3)};
    CHECK_THROWS_AS(predict(model, other), std::invalid_argument);
    const StressCurved same{prob.curves.col(0), prob.grid};
    CHECK(predict(model, same).vec() == Vector4d(predictBatch(model, prob.curves).col(0)));
  }
}

TEST_CASE("model documents") {
  const SmallProblem prob(42);
  for (ModelKind kind : kAllModelKinds) {
    const InverseModel model = InverseModel::init(kind, prob.grid, prob.curves, prob.params, 3);
    const auto j = modelToJson(model);
    const InverseModel back = modelFromJson(nlohmann::json::parse(j.dump()));
    CHECK(back.kind == kind);
    CHECK(back.grid == model.grid);
    CHECK(flattenBlocks(back) == flattenBlocks(model));
    CHECK(predictBatch(back, prob.curves) == predictBatch(model, prob.curves));
    CHECK(modelToJson(back) == j);
  }
  auto j = modelToJson(InverseModel::init(ModelKind::Bad, prob.grid, prob.curves, prob.params, 3));
  auto mixed = j;
  mixed["kind"] = "ugly";
  CHECK_THROWS_AS(modelFromJson(mixed), std::invalid_argument);
  auto short_params = j;
  short_params["networks"]["mlp"]["params"].erase(0);
  CHECK_THROWS_AS(modelFromJson(short_params), std::invalid_argument);
  auto bad_kind = j;
  bad_kind["kind"] = "neutral";
  CHECK_THROWS_AS(modelFromJson(bad_kind), std::invalid_argument);
}
