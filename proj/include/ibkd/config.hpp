#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ibkd/kernels.hpp"

namespace ibkd {

/// Scalar hyperparameters for both training stages. Epoch counts are sized
/// for the synthetic task.
struct DistillConfig {
  double tau_distill = 0.1;
  double tau_finetune = 0.05;
  double beta1 = 1.0;
  double beta2 = 0.5;
  double gamma = 0.5;
  kernels::KernelSpec kernel = kernels::KernelSpec::rbf(0.5);
  double lr_distill = 1e-4;
  double lr_finetune = 3e-5;
  std::size_t batch_size = 256;
  std::size_t epochs_distill = 100;
  std::size_t epochs_finetune = 3;
  std::size_t hard_negatives_K = 8;
  std::uint64_t seed = 7;
  std::optional<std::size_t> reduce_to;
  /// Student layer widths [d_in, hidden…, d_out].
  std::vector<std::size_t> student_dims = {64, 64, 32};
  double grad_clip = 5.0;

  /// Throws a config error on invalid values.
  void validate() const;
  /// Values outside the grid-search ranges reported with the method; these
  /// are advisory only.
  std::vector<std::string> range_warnings() const;

  /// Parses a run-config JSON document. Missing fields keep their defaults;
  /// unknown fields are rejected.
  static DistillConfig from_json_text(const std::string& text);
  std::string to_json_text() const;

  bool operator==(const DistillConfig&) const = default;
};

}  // namespace ibkd
