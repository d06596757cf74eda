#include "hardid/models.hpp"

#include "hardid/dataset.hpp"
#include "hardid/material_model.hpp"
#include "hardid/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hardid {

std::string kindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::Bad: return "bad";
    case ModelKind::Good: return "good";
    case ModelKind::Ugly: return "ugly";
  }
  return "?";
}

ModelKind parseModelKind(const std::string& text) {
  for (ModelKind k : kAllModelKinds) {
    if (kindName(k) == text) return k;
  }
  throw std::invalid_argument("unknown model kind '" + text + "' (expected bad, good or ugly)");
}

std::vector<LayerSpec> mlpLayers(int input_dim) {
  return {{input_dim, 14, Activation::Tanh}, {14, 24, Activation::Tanh}, {24, 4, Activation::Identity}};
}

std::vector<LayerSpec> expertLayers(int input_dim) {
  return {{input_dim, 30, Activation::Tanh}, {30, 8, Activation::Identity}};
}

std::vector<LayerSpec> gateLayers(int input_dim) {
  return {{input_dim, 10, Activation::Tanh}, {10, 2, Activation::Identity}};
}

MoeNet MoeNet::init(int input_dim, std::uint64_t seed) {
  return {initNet<double>(expertLayers(input_dim), deriveSeed(seed, 1)),
          initNet<double>(expertLayers(input_dim), deriveSeed(seed, 2)),
          initNet<double>(gateLayers(input_dim), deriveSeed(seed, 3))};
}

// --- losses ----------------------------------------------------------------

ParamLoss lossMse(const Vector4d& predicted, const Vector4d& target) {
  const Vector4d diff = predicted - target;
  return {diff.squaredNorm(), 2.0 * diff};
}

ParamLoss lossForward(const Vector4d& predicted_raw, const Eigen::Ref<const VectorXd>& target_curve,
                      const StrainGridd& grid) {
  const MaterialParamsd magnitude(predicted_raw.cwiseAbs());
  ParamLoss loss;
  Vector4d grad_r;
  for (int i = 0; i < grid.count(); ++i) {
    const double r = hardeningStressWithGrad(grid.point(i), magnitude, grad_r);
    const double residual = r - target_curve[i];
    loss.value += residual * residual;
    loss.grad += 2.0 * residual * grad_r;
  }
  // Chain rule through |.|; sign(0) = 0.
  for (int j = 0; j < 4; ++j) {
    const double x = predicted_raw[j];
    loss.grad[j] *= double((x > 0.0) - (x < 0.0));
  }
  return loss;
}

ParamLoss lossForward(const Vector4d& predicted_raw, const MaterialParamsd& target,
                      const StrainGridd& grid) {
  return lossForward(predicted_raw, evaluateCurve(grid, target).values, grid);
}

MixtureOutput MixtureOutput::fromRaw(const Eigen::Vector2d& logits, const Vector4d& mean1,
                                     const Vector4d& log_sigma1, const Vector4d& mean2,
                                     const Vector4d& log_sigma2) {
  MixtureOutput out;
  out.gate_logits = logits;
  const double top = logits.maxCoeff();
  out.gate_probs = (logits.array() - top).unaryExpr([](double v) { return std::exp(v); });
  out.gate_probs /= out.gate_probs.sum();
  out.means = {mean1, mean2};
  out.log_sigmas = {log_sigma1.cwiseMax(-kLogSigmaClamp).cwiseMin(kLogSigmaClamp),
                    log_sigma2.cwiseMax(-kLogSigmaClamp).cwiseMin(kLogSigmaClamp)};
  out.sigmas = {out.log_sigmas[0].array().exp(), out.log_sigmas[1].array().exp()};
  return out;
}

MixtureLoss lossMdnNll(const MixtureOutput& out, const Vector4d& target) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;  // ln(2 pi) / 2
  const double logit_top = out.gate_logits.maxCoeff();
  const double logit_lse =
      logit_top + std::log(std::exp(out.gate_logits[0] - logit_top) + std::exp(out.gate_logits[1] - logit_top));

  std::array<double, 2> log_joint{};
  std::array<Vector4d, 2> z;
  for (int k = 0; k < 2; ++k) {
    z[k] = ((target - out.means[k]).array() / out.sigmas[k].array()).matrix();
    const double log_density =
        -4.0 * kHalfLog2Pi - out.log_sigmas[k].sum() - 0.5 * z[k].squaredNorm();
    log_joint[k] = (out.gate_logits[k] - logit_lse) + log_density;
  }
  const double top = std::max(log_joint[0], log_joint[1]);
  const double lse = top + std::log(std::exp(log_joint[0] - top) + std::exp(log_joint[1] - top));

  MixtureLoss loss;
  loss.value = -lse;
  for (int k = 0; k < 2; ++k) {
    const double responsibility = std::exp(log_joint[k] - lse);
    loss.d_logits[k] = out.gate_probs[k] - responsibility;
    loss.d_means[k] = -responsibility * (z[k].array() / out.sigmas[k].array()).matrix();
    loss.d_log_sigmas[k] = responsibility * (1.0 - z[k].array().square()).matrix();
  }
  return loss;
}

namespace {

MixtureOutput mixtureFromColumns(const Eigen::Ref<const VectorXd>& e1,
                                 const Eigen::Ref<const VectorXd>& e2,
                                 const Eigen::Ref<const VectorXd>& gate) {
  return MixtureOutput::fromRaw(gate, e1.head<4>(), e1.tail<4>(), e2.head<4>(), e2.tail<4>());
}

// 1 where the raw log-sigma sits inside the clamp window, else 0.
Vector4d clampMask(const Eigen::Ref<const Vector4d>& raw) {
  return (raw.array().abs() <= kLogSigmaClamp).cast<double>();
}

}  // namespace

MixtureOutput moeForward(const MoeNet& net, const Eigen::Ref<const VectorXd>& input) {
  return mixtureFromColumns(forward(net.expert1, input), forward(net.expert2, input),
                            forward(net.gate, input));
}

// --- models ----------------------------------------------------------------

InverseModel InverseModel::init(ModelKind kind, const StrainGridd& grid,
                                const MatrixXd& train_curves, const MatrixXd& train_params,
                                std::uint64_t seed) {
  if (train_curves.rows() != grid.count()) {
    throw std::invalid_argument("training curves do not match the strain grid");
  }
  InverseModel m;
  m.kind = kind;
  m.grid = grid;
  m.input = Standardizer<double>::fit(train_curves);
  m.output = Standardizer<double>::fit(train_params);
  if (kind == ModelKind::Ugly) {
    m.network = MoeNet::init(grid.count(), seed);
  } else {
    m.network = initNet<double>(mlpLayers(grid.count()), deriveSeed(seed, 0));
  }
  if (grid.count() == StrainGridd::kDefaultCount) {
    const Eigen::Index expected = kind == ModelKind::Ugly ? kMoeParamCount : kMlpParamCount;
    if (m.countParams() != expected) {
      throw std::logic_error("architecture has " + std::to_string(m.countParams()) +
                             " parameters, expected " + std::to_string(expected));
    }
  }
  return m;
}

Eigen::Index InverseModel::countParams() const {
  return std::visit([](const auto& net) { return net.countParams(); }, network);
}

std::vector<NetParams<double>*> InverseModel::paramBlocks() {
  if (auto* moe = std::get_if<MoeNet>(&network)) {
    return {&moe->expert1.params(), &moe->expert2.params(), &moe->gate.params()};
  }
  return {&std::get<DenseNetd>(network).params()};
}

std::vector<const NetParams<double>*> InverseModel::paramBlocks() const {
  if (const auto* moe = std::get_if<MoeNet>(&network)) {
    return {&moe->expert1.params(), &moe->expert2.params(), &moe->gate.params()};
  }
  return {&std::get<DenseNetd>(network).params()};
}

double batchLossAndGradient(const InverseModel& model, const MatrixXd& curves,
                            const MatrixXd& params, std::vector<NetParams<double>>& grads) {
  const MatrixXd x = model.input.apply(curves);
  const Eigen::Index batch = x.cols();
  double total = 0.0;

  if (const auto* mlp = std::get_if<DenseNetd>(&model.network)) {
    ForwardCache<double> cache;
    const MatrixXd y = forward(*mlp, x, &cache);
    const MatrixXd predicted = model.output.invert(y);
    MatrixXd d_predicted(4, batch);
    for (Eigen::Index j = 0; j < batch; ++j) {
      // The input curve is the label's forward curve on the model grid.
      const ParamLoss l = model.kind == ModelKind::Good
                              ? lossForward(predicted.col(j), curves.col(j), model.grid)
                              : lossMse(predicted.col(j), params.col(j));
      total += l.value;
      d_predicted.col(j) = l.grad;
    }
    const MatrixXd d_y = d_predicted.array().colwise() * model.output.scale.array();
    grads[0] += backward(*mlp, cache, d_y);
    return total;
  }

  const auto& moe = std::get<MoeNet>(model.network);
  ForwardCache<double> c1, c2, cg;
  const MatrixXd y1 = forward(moe.expert1, x, &c1);
  const MatrixXd y2 = forward(moe.expert2, x, &c2);
  const MatrixXd yg = forward(moe.gate, x, &cg);
  const MatrixXd targets = model.output.apply(params);
  MatrixXd d1(8, batch), d2(8, batch), dg(2, batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const MixtureOutput out = mixtureFromColumns(y1.col(j), y2.col(j), yg.col(j));
    const MixtureLoss l = lossMdnNll(out, targets.col(j));
    total += l.value;
    d1.col(j) << l.d_means[0], l.d_log_sigmas[0].cwiseProduct(clampMask(y1.col(j).tail<4>()));
    d2.col(j) << l.d_means[1], l.d_log_sigmas[1].cwiseProduct(clampMask(y2.col(j).tail<4>()));
    dg.col(j) = l.d_logits;
  }
  grads[0] += backward(moe.expert1, c1, d1);
  grads[1] += backward(moe.expert2, c2, d2);
  grads[2] += backward(moe.gate, cg, dg);
  return total;
}

MatrixXd predictBatch(const InverseModel& model, const MatrixXd& curves) {
  if (curves.rows() != model.grid.count()) {
    throw std::invalid_argument("curve has " + std::to_string(curves.rows()) +
                                " values but the model expects " + std::to_string(model.grid.count()));
  }
  const MatrixXd x = model.input.apply(curves);
  if (const auto* mlp = std::get_if<DenseNetd>(&model.network)) {
    MatrixXd p = model.output.invert(forward(*mlp, x));
    if (model.kind == ModelKind::Good) p = p.cwiseAbs();
    return p;
  }
  const auto& moe = std::get<MoeNet>(model.network);
  const MatrixXd y1 = forward(moe.expert1, x);
  const MatrixXd y2 = forward(moe.expert2, x);
  const MatrixXd yg = forward(moe.gate, x);
  MatrixXd means(4, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    // Softmax is monotone in the logits, so comparing logits picks the same
    // expert as comparing probabilities.
    means.col(j) = yg(1, j) > yg(0, j) ? y2.col(j).head<4>() : y1.col(j).head<4>();
  }
  return model.output.invert(means);
}

MaterialParamsd predict(const InverseModel& model, const StressCurved& curve) {
  if (!(curve.grid == model.grid)) {
    throw std::invalid_argument("curve strain grid differs from the model's training grid");
  }
  return MaterialParamsd(Vector4d(predictBatch(model, curve.values).col(0)));
}

// --- serialization ---------------------------------------------------------

namespace {

std::vector<double> toStd(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd fromStd(const nlohmann::json& j, Eigen::Index expected, const char* what) {
  const auto values = j.get<std::vector<double>>();
  if (expected >= 0 && static_cast<Eigen::Index>(values.size()) != expected) {
    throw std::invalid_argument(std::string(what) + " has " + std::to_string(values.size()) +
                                " values, expected " + std::to_string(expected));
  }
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

nlohmann::json scalerToJson(const Standardizer<double>& s) {
  return {{"offset", toStd(s.offset)}, {"scale", toStd(s.scale)}};
}

Standardizer<double> scalerFromJson(const nlohmann::json& j, Eigen::Index dim) {
  return {fromStd(j.at("offset"), dim, "offset"), fromStd(j.at("scale"), dim, "scale")};
}

}  // namespace

nlohmann::json netToJson(const DenseNetd& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"in", l.in_dim},
                      {"out", l.out_dim},
                      {"activation", l.activation == Activation::Tanh ? "tanh" : "identity"}});
  }
  return {{"layers", layers}, {"params", toStd(net.params().flatten())}};
}

DenseNetd netFromJson(const nlohmann::json& j) {
  std::vector<LayerSpec> specs;
  for (const auto& l : j.at("layers")) {
    const auto act = l.at("activation").get<std::string>();
    if (act != "tanh" && act != "identity") throw std::invalid_argument("unknown activation '" + act + "'");
    specs.push_back({l.at("in").get<int>(), l.at("out").get<int>(),
                     act == "tanh" ? Activation::Tanh : Activation::Identity});
  }
  DenseNetd net(std::move(specs));
  net.params().unflatten(fromStd(j.at("params"), net.countParams(), "params"));
  return net;
}

nlohmann::json modelToJson(const InverseModel& model) {
  nlohmann::json networks;
  if (const auto* moe = std::get_if<MoeNet>(&model.network)) {
    networks = {{"expert1", netToJson(moe->expert1)},
                {"expert2", netToJson(moe->expert2)},
                {"gate", netToJson(moe->gate)}};
  } else {
    networks = {{"mlp", netToJson(std::get<DenseNetd>(model.network))}};
  }
  return {{"kind", kindName(model.kind)},
          {"grid", gridToJson(model.grid)},
          {"input_standardization", scalerToJson(model.input)},
          {"output_scaling", scalerToJson(model.output)},
          {"networks", networks}};
}

InverseModel modelFromJson(const nlohmann::json& j) {
  try {
    InverseModel m;
    m.kind = parseModelKind(j.at("kind").get<std::string>());
    m.grid = gridFromJson(j.at("grid"));
    m.input = scalerFromJson(j.at("input_standardization"), m.grid.count());
    m.output = scalerFromJson(j.at("output_scaling"), 4);
    const auto& nets = j.at("networks");
    if (m.kind == ModelKind::Ugly) {
      m.network = MoeNet{netFromJson(nets.at("expert1")), netFromJson(nets.at("expert2")),
                         netFromJson(nets.at("gate"))};
      const auto& moe = std::get<MoeNet>(m.network);
      if (moe.expert1.inDim() != m.grid.count() || moe.expert1.outDim() != 8 ||
          moe.expert2.inDim() != m.grid.count() || moe.expert2.outDim() != 8 ||
          moe.gate.inDim() != m.grid.count() || moe.gate.outDim() != 2) {
        throw std::invalid_argument("mixture networks have the wrong input/output sizes");
      }
    } else {
      if (nets.contains("expert1")) {
        throw std::invalid_argument("model kind '" + kindName(m.kind) + "' does not take mixture networks");
      }
      m.network = netFromJson(nets.at("mlp"));
      const auto& mlp = std::get<DenseNetd>(m.network);
      if (mlp.inDim() != m.grid.count() || mlp.outDim() != 4) {
        throw std::invalid_argument("MLP has the wrong input/output sizes");
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace hardid
