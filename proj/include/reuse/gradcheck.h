#ifndef REUSE_GRADCHECK_H_
#define REUSE_GRADCHECK_H_

#include <cstdint>
#include <string>
#include <vector>

#include "reuse/model.h"

namespace reuse {

struct GradCheckOptions {
  int seq_len = 5;
  double step = 1e-5;
  // Denominator floor for the relative error, so that coordinates whose true
  // gradient is ~0 are judged on absolute error.
  double floor = 1e-6;
  // Test hook: perturb one analytic gradient entry before comparing.
  bool corrupt_gradient = false;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t parameters_checked = 0;
};

// Tiny model used by gradient checks: L=3, H=2, d=8, d_ff=16, vocab=11.
ModelConfig tiny_gradcheck_config(const ReuseSchedule& schedule);

// Compares transformer_backward against central finite differences of the
// summed token cross-entropy on one random sequence.
GradCheckReport run_gradcheck(const ModelConfig& config, std::uint64_t seed,
                              const GradCheckOptions& options = {});

}  // namespace reuse

#endif  // REUSE_GRADCHECK_H_
