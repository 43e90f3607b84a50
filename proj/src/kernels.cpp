#include "ibkd/kernels.hpp"

#include <cmath>

#include "ibkd/error.hpp"

namespace ibkd::kernels {

void KernelSpec::validate() const {
  if (kind == KernelKind::RBF && !(gamma > 0.0 && std::isfinite(gamma))) {
    fail(ErrorKind::Config, "rbf kernel requires gamma > 0");
  }
  if (kind == KernelKind::IMQ && !(c > 0.0 && std::isfinite(c))) {
    fail(ErrorKind::Config, "imq kernel requires c > 0");
  }
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::RBF: return "rbf";
    case KernelKind::IMQ: return "imq";
  }
  return "unknown";
}

KernelKind kind_from_string(const std::string& name) {
  if (name == "linear") return KernelKind::Linear;
  if (name == "rbf") return KernelKind::RBF;
  if (name == "imq") return KernelKind::IMQ;
  fail(ErrorKind::Config, "unknown kernel kind '" + name + "' (expected linear, rbf or imq)");
}

double evaluate(const KernelSpec& spec, double sq_dist, double inner) {
  switch (spec.kind) {
    case KernelKind::Linear: return inner;
    case KernelKind::RBF: return std::exp(-spec.gamma * sq_dist);
    case KernelKind::IMQ: return 1.0 / std::sqrt(sq_dist + spec.c * spec.c);
  }
  return 0.0;
}

double dk_dsqdist(const KernelSpec& spec, double k_value) {
  switch (spec.kind) {
    case KernelKind::RBF: return -spec.gamma * k_value;
    case KernelKind::IMQ: return -0.5 * k_value * k_value * k_value;
    case KernelKind::Linear: break;
  }
  fail(ErrorKind::Config, "dk_dsqdist: linear kernel is not distance-based");
}

Matrix gram(const KernelSpec& spec, const Matrix& rows) {
  spec.validate();
  if (rows.rows() == 0 || rows.cols() == 0) fail(ErrorKind::Shape, "gram: empty input " + rows.shape_str());
  linalg::require_finite(rows, "gram");
  const std::size_t n = rows.rows();
  Matrix k(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double v;
      if (spec.kind == KernelKind::Linear) {
        v = linalg::dot(rows.row(i), rows.row(j));
      } else {
        const double d2 = i == j ? 0.0 : linalg::squared_distance(rows.row(i), rows.row(j));
        v = evaluate(spec, d2, 0.0);
      }
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Matrix center(const Matrix& k) {
  if (k.rows() != k.cols()) fail(ErrorKind::Shape, "center: non-square input " + k.shape_str());
  const std::size_t n = k.rows();
  if (n == 0) return k;
  std::vector<double> row_mean(n, 0.0), col_mean(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      row_mean[i] += k(i, j);
      col_mean[j] += k(i, j);
    }
  }
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    grand += row_mean[i];
    row_mean[i] /= static_cast<double>(n);
    col_mean[i] /= static_cast<double>(n);
  }
  grand /= static_cast<double>(n * n);
  Matrix out(n, n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = k(i, j) - row_mean[i] - col_mean[j] + grand;
  return out;
}

}  // namespace ibkd::kernels
