#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "egogest/model.hpp"

namespace egogest {

struct GradCheckDims {
  int input = 4;
  int hidden = 8;
  int classes = 3;
  int steps = 5;
  int batch = 2;
};

struct GradCheckOptions {
  bool bn_train = true;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Test fixture: scale the analytic gradient of one LSTM gate ("input",
  /// "forget", "cell" or "output") before comparing.
  std::optional<std::string> corrupt_gate;
  double corrupt_factor = 1.5;
};

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t count = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool pass = true;

  std::vector<std::string> failing() const;
};

/// Relative error |a - n| / max(|a|, |n|, floor), the comparison used for
/// every checked element.
double relative_error(double analytic, double numeric, double floor = 1e-7) noexcept;

/// Central finite differences of the frame-wise NLL of a seeded tiny model
/// against `backward`, for every parameter (LSTM blocks split per gate) and
/// for the network input.
GradCheckReport grad_check(std::uint64_t seed, const GradCheckDims& dims = {},
                           const GradCheckOptions& options = {});

}  // namespace egogest
