#include "egogest/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>

#include "egogest/error.hpp"
#include "egogest/random.hpp"

namespace egogest {

namespace {

constexpr std::array<const char*, 4> kGateNames = {"input", "forget", "cell", "output"};

struct Fixture {
  ModelState state;
  SequenceBatch batch;
  std::vector<int> labels;
  Mode mode = Mode::Train;

  double loss() const { return nll_loss(forward(state, batch, mode), labels).loss; }
};

Fixture make_fixture(std::uint64_t seed, const GradCheckDims& dims, bool bn_train) {
  Fixture fx;
  fx.mode = bn_train ? Mode::Train : Mode::Eval;
  fx.state = ModelState::initialize({dims.input, dims.hidden, dims.classes}, seed);
  Rng rng(derive_seed(seed, 17));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.5, 1.5);
  // Generic (non-default) BN and bias values so no gradient is trivially zero.
  for (Eigen::Index i = 0; i < dims.input; ++i) {
    fx.state.bn.gamma(i) = uni(rng);
    fx.state.bn.beta(i) = 0.3 * normal(rng);
    fx.state.bn.running_mean(i) = 0.2 * normal(rng);
    fx.state.bn.running_var(i) = uni(rng);
  }
  for (Eigen::Index i = 0; i < fx.state.lstm.bias.size(); ++i) fx.state.lstm.bias(i) += 0.1 * normal(rng);
  for (Eigen::Index i = 0; i < fx.state.fc.bias.size(); ++i) fx.state.fc.bias(i) = 0.1 * normal(rng);

  fx.batch.batch = dims.batch;
  fx.batch.steps = dims.steps;
  fx.batch.data.resize(static_cast<Eigen::Index>(dims.batch) * dims.steps, dims.input);
  for (Eigen::Index r = 0; r < fx.batch.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < dims.input; ++c) fx.batch.data(r, c) = 1.0 + normal(rng);
  }
  std::uniform_int_distribution<int> label(0, dims.classes - 1);
  fx.labels.resize(static_cast<std::size_t>(fx.batch.data.rows()));
  for (auto& l : fx.labels) l = label(rng);
  return fx;
}

// Name of the report bucket for element `index` of parameter group `group`.
std::string bucket(std::size_t group, std::size_t index, const ModelDims& dims) {
  const auto name = std::string(parameter_names()[group]);
  const auto h = static_cast<std::size_t>(dims.hidden);
  const std::size_t rows = 4 * h;
  switch (group) {
    case 2:  // lstm.w_ih, column-major 4H x D
    case 3:  // lstm.w_hh, column-major 4H x H
      return name + "." + kGateNames[(index % rows) / h];
    case 4:
      return name + "." + kGateNames[index / h];
    default:
      return name;
  }
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<std::string> GradCheckReport::failing() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (!e.pass) out.push_back(e.name);
  }
  return out;
}

GradCheckReport grad_check(std::uint64_t seed, const GradCheckDims& dims,
                           const GradCheckOptions& options) {
  if (dims.input <= 0 || dims.hidden <= 0 || dims.classes <= 0 || dims.steps <= 0 ||
      dims.batch <= 0) {
    throw Error(ErrorCode::InvalidArgument, "grad_check dimensions must be positive");
  }
  Fixture fx = make_fixture(seed, dims, options.bn_train);

  ForwardCache cache;
  const RowMatrix logits = forward(fx.state, fx.batch, fx.mode, &cache);
  const LossResult loss = nll_loss(logits, fx.labels);
  const Gradients grads = backward(fx.state, cache, loss.grad);

  std::vector<GradCheckEntry> entries;
  auto record = [&](const std::string& name, double err) {
    auto it = std::find_if(entries.begin(), entries.end(),
                           [&](const GradCheckEntry& e) { return e.name == name; });
    if (it == entries.end()) {
      entries.push_back({name, 0.0, 0, true});
      it = std::prev(entries.end());
    }
    it->max_relative_error = std::max(it->max_relative_error, err);
    ++it->count;
  };

  auto numeric = [&](double& slot) {
    const double saved = slot;
    slot = saved + options.step;
    const double up = fx.loss();
    slot = saved - options.step;
    const double down = fx.loss();
    slot = saved;
    return (up - down) / (2.0 * options.step);
  };

  const auto params = parameter_views(fx.state);
  const auto analytic = grads.views();
  for (std::size_t gi = 0; gi < kParameterGroups; ++gi) {
    for (std::size_t k = 0; k < params[gi].size(); ++k) {
      const std::string name = bucket(gi, k, fx.state.dims);
      double a = analytic[gi][k];
      if (options.corrupt_gate && name.ends_with("." + *options.corrupt_gate)) {
        a *= options.corrupt_factor;
      }
      record(name, relative_error(a, numeric(params[gi][k])));
    }
  }
  for (Eigen::Index r = 0; r < fx.batch.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < fx.batch.data.cols(); ++c) {
      record("input", relative_error(grads.input(r, c), numeric(fx.batch.data(r, c))));
    }
  }

  GradCheckReport report;
  for (auto& e : entries) {
    e.pass = std::isfinite(e.max_relative_error) && e.max_relative_error <= options.tolerance;
    report.pass = report.pass && e.pass;
  }
  report.entries = std::move(entries);
  return report;
}

}  // namespace egogest
