#include "egogest/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "egogest/error.hpp"
#include "egogest/random.hpp"

namespace egogest {

namespace {

using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string shape(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void expect_shape(const char* what, Eigen::Index r, Eigen::Index c, Eigen::Index er, Eigen::Index ec) {
  if (r != er || c != ec) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + " is " + shape(r, c) + ", expected " + shape(er, ec));
  }
}

// Gate activations for one block of rows of pre-activations.
template <typename Block>
void activate(Block&& z, Eigen::Index hidden) {
  auto a = z.array();
  a.leftCols(2 * hidden) = a.leftCols(2 * hidden).unaryExpr(&sigmoid);
  a.middleCols(2 * hidden, hidden) = a.middleCols(2 * hidden, hidden).tanh();
  a.rightCols(hidden) = a.rightCols(hidden).unaryExpr(&sigmoid);
}

}  // namespace

ModelState ModelState::initialize(const ModelDims& dims, std::uint64_t seed) {
  if (dims.input <= 0 || dims.hidden <= 0 || dims.classes <= 0) {
    throw Error(ErrorCode::ShapeMismatch, "model dimensions must be positive");
  }
  const Eigen::Index d = dims.input, h = dims.hidden, n = dims.classes;
  ModelState s;
  s.dims = dims;
  s.bn.gamma = Eigen::VectorXd::Ones(d);
  s.bn.beta = Eigen::VectorXd::Zero(d);
  s.bn.running_mean = Eigen::VectorXd::Zero(d);
  s.bn.running_var = Eigen::VectorXd::Ones(d);

  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  std::uniform_real_distribution<double> uni(-bound, bound);
  auto fill = [&](Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c) {
    m.resize(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uni(rng);
    }
  };
  fill(s.lstm.w_ih, 4 * h, d);
  fill(s.lstm.w_hh, 4 * h, h);
  s.lstm.bias = Eigen::VectorXd::Zero(4 * h);
  s.lstm.bias.segment(h, h).setOnes();
  fill(s.fc.weight, n, h);
  s.fc.bias = Eigen::VectorXd::Zero(n);
  return s;
}

std::size_t ModelState::parameter_count() const noexcept {
  const auto d = static_cast<std::size_t>(dims.input);
  const auto h = static_cast<std::size_t>(dims.hidden);
  const auto n = static_cast<std::size_t>(dims.classes);
  return 2 * d + 4 * h * (d + h + 1) + n * (h + 1);
}

void ModelState::validate() const {
  const Eigen::Index d = dims.input, h = dims.hidden, n = dims.classes;
  expect_shape("bn.gamma", bn.gamma.size(), 1, d, 1);
  expect_shape("bn.beta", bn.beta.size(), 1, d, 1);
  expect_shape("bn.running_mean", bn.running_mean.size(), 1, d, 1);
  expect_shape("bn.running_var", bn.running_var.size(), 1, d, 1);
  expect_shape("lstm.w_ih", lstm.w_ih.rows(), lstm.w_ih.cols(), 4 * h, d);
  expect_shape("lstm.w_hh", lstm.w_hh.rows(), lstm.w_hh.cols(), 4 * h, h);
  expect_shape("lstm.bias", lstm.bias.size(), 1, 4 * h, 1);
  expect_shape("fc.weight", fc.weight.rows(), fc.weight.cols(), n, h);
  expect_shape("fc.bias", fc.bias.size(), 1, n, 1);
  if ((bn.running_var.array() < 0.0).any()) {
    throw Error(ErrorCode::ShapeMismatch, "bn.running_var has negative entries");
  }
}

std::array<std::string_view, kParameterGroups> parameter_names() noexcept {
  return {"bn.gamma", "bn.beta", "lstm.w_ih", "lstm.w_hh", "lstm.bias", "fc.weight", "fc.bias"};
}

std::array<std::span<double>, kParameterGroups> parameter_views(ModelState& s) {
  auto view = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
  return {view(s.bn.gamma), view(s.bn.beta), view(s.lstm.w_ih), view(s.lstm.w_hh),
          view(s.lstm.bias), view(s.fc.weight), view(s.fc.bias)};
}

std::array<std::span<const double>, kParameterGroups> Gradients::views() const {
  auto view = [](const auto& m) {
    return std::span<const double>(m.data(), static_cast<std::size_t>(m.size()));
  };
  return {view(bn_gamma), view(bn_beta), view(w_ih), view(w_hh),
          view(lstm_bias), view(fc_weight), view(fc_bias)};
}

RowMatrix forward(const ModelState& state, const SequenceBatch& batch, Mode mode,
                  ForwardCache* cache) {
  const Eigen::Index d = state.dims.input, h = state.dims.hidden;
  const Eigen::Index m = batch.batch, steps = batch.steps;
  if (m <= 0 || steps <= 0) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  expect_shape("batch", batch.data.rows(), batch.data.cols(), m * steps, d);

  const Eigen::Index n = m * steps;
  Eigen::RowVectorXd mean, inv_std;
  if (mode == Mode::Train) {
    mean = batch.data.colwise().sum() / static_cast<double>(n);
    const Eigen::RowVectorXd var =
        (batch.data.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n);
    inv_std = (var.array() + state.bn.eps).rsqrt();
    if (cache != nullptr) cache->var = var;
  } else {
    mean = state.bn.running_mean.transpose();
    inv_std = (state.bn.running_var.transpose().array() + state.bn.eps).rsqrt();
  }

  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;
  c.mode = mode;
  c.batch = static_cast<int>(m);
  c.steps = static_cast<int>(steps);
  c.mean = mean;
  c.inv_std = inv_std;
  c.xhat = (batch.data.rowwise() - mean).array().rowwise() * inv_std.array();
  c.y = (c.xhat.array().rowwise() * state.bn.gamma.transpose().array()).rowwise() +
        state.bn.beta.transpose().array();

  c.gates.noalias() = c.y * state.lstm.w_ih.transpose();
  c.gates.rowwise() += state.lstm.bias.transpose();
  c.cell.resize(n, h);
  c.tanh_cell.resize(n, h);
  c.hidden.resize(n, h);

  for (Eigen::Index t = 0; t < steps; ++t) {
    auto z = c.gates.middleRows(t * m, m);
    if (t > 0) z.noalias() += c.hidden.middleRows((t - 1) * m, m) * state.lstm.w_hh.transpose();
    activate(z, h);
    auto i = z.leftCols(h).array();
    auto f = z.middleCols(h, h).array();
    auto g = z.middleCols(2 * h, h).array();
    auto o = z.rightCols(h).array();
    auto cell = c.cell.middleRows(t * m, m);
    if (t > 0) {
      cell = (f * c.cell.middleRows((t - 1) * m, m).array() + i * g).matrix();
    } else {
      cell = (i * g).matrix();
    }
    c.tanh_cell.middleRows(t * m, m) = cell.array().tanh();
    c.hidden.middleRows(t * m, m) = (o * c.tanh_cell.middleRows(t * m, m).array()).matrix();
  }

  RowMatrix logits = c.hidden * state.fc.weight.transpose();
  logits.rowwise() += state.fc.bias.transpose();
  return logits;
}

void update_running_stats(BatchNormState& bn, const ForwardCache& cache) {
  if (cache.mode != Mode::Train) return;
  const Eigen::VectorXd var = cache.var.transpose();
  bn.running_mean = (1.0 - bn.momentum) * bn.running_mean + bn.momentum * cache.mean.transpose();
  bn.running_var = (1.0 - bn.momentum) * bn.running_var + bn.momentum * var;
}

LossResult nll_loss(const RowMatrix& logits, std::span<const int> labels) {
  const Eigen::Index rows = logits.rows(), classes = logits.cols();
  if (static_cast<std::size_t>(rows) != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "labels/logits row count mismatch");
  }
  if (rows == 0) throw Error(ErrorCode::ShapeMismatch, "empty logits");
  LossResult out;
  out.grad.resize(rows, classes);
  const double scale = 1.0 / static_cast<double>(rows);
  double total = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= classes) {
      throw Error(ErrorCode::LabelOutOfRange,
                  "label " + std::to_string(label) + " at row " + std::to_string(r));
    }
    const double mx = logits.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(r).array() - mx).exp();
    const double sum = e.sum();
    total += std::log(sum) + mx - logits(r, label);
    out.grad.row(r) = e * (scale / sum);
    out.grad(r, label) -= scale;
  }
  out.loss = total * scale;
  return out;
}

Gradients backward(const ModelState& state, const ForwardCache& cache, const RowMatrix& dlogits) {
  const Eigen::Index h = state.dims.hidden, d = state.dims.input;
  const Eigen::Index m = cache.batch, steps = cache.steps, n = m * steps;
  if (cache.y.rows() != n || cache.y.cols() != d || cache.hidden.cols() != h ||
      dlogits.rows() != n || dlogits.cols() != state.dims.classes) {
    throw Error(ErrorCode::StaleCache, "cache/gradient shapes do not match the model");
  }

  Gradients g;
  g.fc_weight = dlogits.transpose() * cache.hidden;
  g.fc_bias = dlogits.colwise().sum().transpose();
  const RowMatrix dh_out = dlogits * state.fc.weight;

  RowMatrix dz(n, 4 * h);
  RowMatrix dh_next = RowMatrix::Zero(m, h);
  RowMatrix dc_next = RowMatrix::Zero(m, h);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto gates = cache.gates.middleRows(t * m, m).array();
    const auto i = gates.leftCols(h);
    const auto f = gates.middleCols(h, h);
    const auto gg = gates.middleCols(2 * h, h);
    const auto o = gates.rightCols(h);
    const auto th = cache.tanh_cell.middleRows(t * m, m).array();

    const RowArray dh = dh_out.middleRows(t * m, m).array() + dh_next.array();
    const RowArray dc = dh * o * (1.0 - th.square()) + dc_next.array();

    auto dzt = dz.middleRows(t * m, m).array();
    dzt.leftCols(h) = dc * gg * i * (1.0 - i);
    if (t > 0) {
      dzt.middleCols(h, h) = dc * cache.cell.middleRows((t - 1) * m, m).array() * f * (1.0 - f);
    } else {
      dzt.middleCols(h, h).setZero();
    }
    dzt.middleCols(2 * h, h) = dc * i * (1.0 - gg.square());
    dzt.rightCols(h) = dh * th * o * (1.0 - o);

    dc_next = (dc * f).matrix();
    dh_next.noalias() = dz.middleRows(t * m, m) * state.lstm.w_hh;
  }

  g.w_ih = dz.transpose() * cache.y;
  g.lstm_bias = dz.colwise().sum().transpose();
  g.w_hh = Eigen::MatrixXd::Zero(4 * h, h);
  if (steps > 1) {
    g.w_hh.noalias() = dz.bottomRows(n - m).transpose() * cache.hidden.topRows(n - m);
  }
  const RowMatrix dy = dz * state.lstm.w_ih;

  g.bn_gamma = (dy.array() * cache.xhat.array()).colwise().sum().transpose();
  g.bn_beta = dy.colwise().sum().transpose();
  const Eigen::RowVectorXd scale = state.bn.gamma.transpose().array() * cache.inv_std.array();
  if (cache.mode == Mode::Train) {
    const double inv_n = 1.0 / static_cast<double>(n);
    g.input = ((dy.rowwise() - g.bn_beta.transpose() * inv_n).array() -
               cache.xhat.array().rowwise() * (g.bn_gamma.transpose().array() * inv_n))
                  .rowwise() *
              scale.array();
  } else {
    g.input = dy.array().rowwise() * scale.array();
  }
  return g;
}

RecurrentState RecurrentState::zeros(int hidden) {
  return {Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(hidden)};
}

Eigen::MatrixXd run_sequence(const ModelState& state, const Eigen::Ref<const Eigen::MatrixXd>& x,
                             RecurrentState& carry) {
  const Eigen::Index d = state.dims.input, h = state.dims.hidden;
  if (x.cols() != d) {
    throw Error(ErrorCode::ShapeMismatch,
                "sequence has " + std::to_string(x.cols()) + " features, model expects " +
                    std::to_string(d));
  }
  if (carry.h.size() != h || carry.c.size() != h) {
    throw Error(ErrorCode::ShapeMismatch, "recurrent state does not match hidden size");
  }
  const Eigen::ArrayXd scale =
      state.bn.gamma.array() * (state.bn.running_var.array() + state.bn.eps).rsqrt();
  const Eigen::ArrayXd shift = state.bn.beta.array() - state.bn.running_mean.array() * scale;

  Eigen::MatrixXd logits(x.rows(), state.dims.classes);
  Eigen::VectorXd z(4 * h);
  Eigen::VectorXd y(d);
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    y = (x.row(t).transpose().array() * scale + shift).matrix();
    z = state.lstm.bias;
    z.noalias() += state.lstm.w_ih * y;
    z.noalias() += state.lstm.w_hh * carry.h;
    const Eigen::ArrayXd i = z.head(h).array().unaryExpr(&sigmoid);
    const Eigen::ArrayXd f = z.segment(h, h).array().unaryExpr(&sigmoid);
    const Eigen::ArrayXd g = z.segment(2 * h, h).array().tanh();
    const Eigen::ArrayXd o = z.tail(h).array().unaryExpr(&sigmoid);
    carry.c = (f * carry.c.array() + i * g).matrix();
    carry.h = (o * carry.c.array().tanh()).matrix();
    logits.row(t) = (state.fc.weight * carry.h + state.fc.bias).transpose();
  }
  return logits;
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

int argmax(const Eigen::Ref<const Eigen::VectorXd>& values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = i;
  }
  return static_cast<int>(best);
}

FramewisePrediction predict_framewise(const ModelState& state,
                                      const Eigen::Ref<const Eigen::MatrixXd>& x) {
  RecurrentState carry = RecurrentState::zeros(state.dims.hidden);
  const Eigen::MatrixXd logits = run_sequence(state, x, carry);
  FramewisePrediction out;
  out.probabilities.resize(logits.rows(), logits.cols());
  out.labels.reserve(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    out.probabilities.row(t) = softmax(logits.row(t).transpose()).transpose();
    out.labels.push_back(argmax(logits.row(t).transpose()));
  }
  return out;
}

}  // namespace egogest
