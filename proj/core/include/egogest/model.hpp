#pragma once

// Batch normalization -> single-layer LSTM -> fully connected head, trained
// with a frame-wise negative log likelihood. Gradients are exact BPTT.
//
// Batches are time-major: row t * M + m of a SequenceBatch holds step t of
// snippet m. LSTM gate blocks are ordered input, forget, cell, output.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace egogest {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Mode { Train, Eval };

struct ModelDims {
  int input = 32;
  int hidden = 128;
  int classes = 5;

  bool operator==(const ModelDims&) const = default;
};

struct BatchNormState {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

struct LstmParams {
  Eigen::MatrixXd w_ih;  // 4H x D
  Eigen::MatrixXd w_hh;  // 4H x H
  Eigen::VectorXd bias;  // 4H
};

struct FcParams {
  Eigen::MatrixXd weight;  // N x H
  Eigen::VectorXd bias;    // N
};

struct ModelState {
  ModelDims dims;
  std::string layout;  // feature layout the model was trained on
  BatchNormState bn;
  LstmParams lstm;
  FcParams fc;

  /// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases except the forget
  /// gate (+1), identity batch normalization.
  static ModelState initialize(const ModelDims& dims, std::uint64_t seed);

  /// BN(2D) + LSTM(4H(D+H+1)) + FC(N(H+1)).
  std::size_t parameter_count() const noexcept;
  /// Throws ShapeMismatch when any array disagrees with `dims`.
  void validate() const;
};

/// Trainable parameters in a fixed order, as flat views.
inline constexpr std::size_t kParameterGroups = 7;
std::array<std::string_view, kParameterGroups> parameter_names() noexcept;
std::array<std::span<double>, kParameterGroups> parameter_views(ModelState& state);

struct SequenceBatch {
  int batch = 0;
  int steps = 0;
  RowMatrix data;  // (steps * batch) x features

  Eigen::Index rows() const noexcept { return data.rows(); }
};

struct ForwardCache {
  Mode mode = Mode::Eval;
  int batch = 0;
  int steps = 0;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd var;  // biased batch variance (train mode)
  Eigen::RowVectorXd inv_std;
  RowMatrix xhat;    // normalized input
  RowMatrix y;       // BN output / LSTM input
  RowMatrix gates;   // post-activation i, f, g, o
  RowMatrix cell;
  RowMatrix tanh_cell;
  RowMatrix hidden;
};

struct Gradients {
  Eigen::VectorXd bn_gamma;
  Eigen::VectorXd bn_beta;
  Eigen::MatrixXd w_ih;
  Eigen::MatrixXd w_hh;
  Eigen::VectorXd lstm_bias;
  Eigen::MatrixXd fc_weight;
  Eigen::VectorXd fc_bias;
  RowMatrix input;

  std::array<std::span<const double>, kParameterGroups> views() const;
};

/// Logits ((T*M) x N). Train mode normalizes with the batch statistics and
/// records them in `cache`; eval mode uses the running statistics. The
/// state is not modified; see update_running_stats.
RowMatrix forward(const ModelState& state, const SequenceBatch& batch, Mode mode,
                  ForwardCache* cache = nullptr);

/// running <- (1 - momentum) * running + momentum * batch (biased variance).
void update_running_stats(BatchNormState& bn, const ForwardCache& cache);

struct LossResult {
  double loss = 0.0;
  RowMatrix grad;  // d loss / d logits
};

/// Mean frame-wise -log softmax(logits)[label]; labels are (T*M) class ids
/// in the same time-major order as the logits.
LossResult nll_loss(const RowMatrix& logits, std::span<const int> labels);

Gradients backward(const ModelState& state, const ForwardCache& cache, const RowMatrix& dlogits);

/// Hidden and cell state carried across calls in streaming inference.
struct RecurrentState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;

  static RecurrentState zeros(int hidden);
};

/// Eval-mode logits (T x N) of one sequence continuing from `carry`, which
/// is updated to the final state. Step-by-step evaluation, so splitting a
/// sequence into consecutive calls reproduces the single call bit for bit.
Eigen::MatrixXd run_sequence(const ModelState& state, const Eigen::Ref<const Eigen::MatrixXd>& x,
                             RecurrentState& carry);

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);
/// Index of the largest entry; ties go to the lowest index.
int argmax(const Eigen::Ref<const Eigen::VectorXd>& values);

struct FramewisePrediction {
  std::vector<int> labels;
  Eigen::MatrixXd probabilities;  // T x N
};

/// Unfiltered per-frame predictions over a whole sequence (zero initial state).
FramewisePrediction predict_framewise(const ModelState& state,
                                      const Eigen::Ref<const Eigen::MatrixXd>& x);

}  // namespace egogest
