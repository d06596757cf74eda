#pragma once

// The three inverse models mapping a sampled hardening curve to parameters:
//
//   Bad   MLP trained with squared error against the labelled parameters.
//   Good  Same MLP, trained on the squared curve mismatch between the label's
//         curve and the curve of |prediction| (forward model in the loss).
//   Ugly  Two experts plus a softmax gate emitting a two-component diagonal
//         Gaussian mixture, trained by negative log-likelihood.

#include "hardid/dense_net.hpp"
#include "hardid/types.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace hardid {

enum class ModelKind { Bad, Good, Ugly };

std::string kindName(ModelKind kind);
ModelKind parseModelKind(const std::string& text);
inline constexpr std::array<ModelKind, 3> kAllModelKinds = {ModelKind::Bad, ModelKind::Good,
                                                            ModelKind::Ugly};

// --- architectures ---------------------------------------------------------

/// in -> 14 (tanh) -> 24 (tanh) -> 4; 754 parameters for 20 inputs.
std::vector<LayerSpec> mlpLayers(int input_dim);
/// in -> 30 (tanh) -> 8: four means and four log-sigmas.
std::vector<LayerSpec> expertLayers(int input_dim);
/// in -> 10 (tanh) -> 2 gate logits.
std::vector<LayerSpec> gateLayers(int input_dim);

inline constexpr Eigen::Index kMlpParamCount = 754;
inline constexpr Eigen::Index kMoeParamCount = 1988;
inline constexpr double kLogSigmaClamp = 10.0;

struct MoeNet {
  DenseNetd expert1;
  DenseNetd expert2;
  DenseNetd gate;

  static MoeNet init(int input_dim, std::uint64_t seed);
  Eigen::Index countParams() const {
    return expert1.countParams() + expert2.countParams() + gate.countParams();
  }
};

// --- losses ----------------------------------------------------------------

struct ParamLoss {
  double value = 0.0;
  Vector4d grad = Vector4d::Zero();  // w.r.t. the predicted 4-vector
};

/// sum_j (predicted_j - target_j)^2.
ParamLoss lossMse(const Vector4d& predicted, const Vector4d& target);

/// sum_i [R(eps_i, target) - R(eps_i, |predicted_raw|)]^2 over the grid, with
/// the chain rule through |.| using sign(0) = 0.
ParamLoss lossForward(const Vector4d& predicted_raw, const MaterialParamsd& target,
                      const StrainGridd& grid);
/// Same, with the target curve already sampled on `grid`.
ParamLoss lossForward(const Vector4d& predicted_raw, const Eigen::Ref<const VectorXd>& target_curve,
                      const StrainGridd& grid);

struct MixtureOutput {
  Eigen::Vector2d gate_logits;
  Eigen::Vector2d gate_probs;
  std::array<Vector4d, 2> means;
  std::array<Vector4d, 2> log_sigmas;  // after clamping
  std::array<Vector4d, 2> sigmas;

  /// Applies softmax to the logits and clamps log-sigmas to +-kLogSigmaClamp.
  static MixtureOutput fromRaw(const Eigen::Vector2d& logits, const Vector4d& mean1,
                               const Vector4d& log_sigma1, const Vector4d& mean2,
                               const Vector4d& log_sigma2);
};

struct MixtureLoss {
  double value = 0.0;
  Eigen::Vector2d d_logits = Eigen::Vector2d::Zero();
  std::array<Vector4d, 2> d_means{Vector4d::Zero(), Vector4d::Zero()};
  std::array<Vector4d, 2> d_log_sigmas{Vector4d::Zero(), Vector4d::Zero()};
};

/// -log sum_k g_k N(target | mu_k, diag(sigma_k^2)) via log-sum-exp, with
/// gradients w.r.t. gate logits, means and (clamped) log-sigmas.
MixtureLoss lossMdnNll(const MixtureOutput& out, const Vector4d& target);

MixtureOutput moeForward(const MoeNet& net, const Eigen::Ref<const VectorXd>& input);

// --- models ----------------------------------------------------------------

/// A trained (or freshly initialized) inverse model. Inputs are standardized
/// with `input`; network outputs live in the space mapped back to parameters
/// by `output.invert`.
struct InverseModel {
  ModelKind kind = ModelKind::Bad;
  StrainGridd grid;
  Standardizer<double> input;
  Standardizer<double> output;
  std::variant<DenseNetd, MoeNet> network;

  /// Fresh model with scalers fitted to the training set and seeded weights.
  /// Asserts the 754 / 1988 parameter counts for 20-point grids.
  static InverseModel init(ModelKind kind, const StrainGridd& grid, const MatrixXd& train_curves,
                           const MatrixXd& train_params, std::uint64_t seed);

  Eigen::Index countParams() const;

  /// All trainable parameter blocks, one per sub-network.
  std::vector<NetParams<double>*> paramBlocks();
  std::vector<const NetParams<double>*> paramBlocks() const;
};

/// Sum over the batch of the kind's loss, accumulating gradients into `grads`
/// (one entry per param block, zeroed by the caller). `curves` and `params`
/// hold one sample per column, unstandardized.
double batchLossAndGradient(const InverseModel& model, const MatrixXd& curves,
                            const MatrixXd& params, std::vector<NetParams<double>>& grads);

/// Parameter predictions (4 x N) for unstandardized curves (S x N).
///   Bad  -> raw output; Good -> |output|; Ugly -> mean of the expert with the
///   larger gate probability, expert 1 on ties.
MatrixXd predictBatch(const InverseModel& model, const MatrixXd& curves);

MaterialParamsd predict(const InverseModel& model, const StressCurved& curve);

nlohmann::json netToJson(const DenseNetd& net);
DenseNetd netFromJson(const nlohmann::json& j);
nlohmann::json modelToJson(const InverseModel& model);
InverseModel modelFromJson(const nlohmann::json& j);

}  // namespace hardid
