#include "ibkd/reference.hpp"

#include <algorithm>
#include <cmath>

#include "ibkd/error.hpp"

namespace ibkd::serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::Shape, "matmul: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Matrix gram(const kernels::KernelSpec& spec, const Matrix& rows) {
  spec.validate();
  const std::size_t n = rows.rows();
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0, ip = 0.0;
      for (std::size_t c = 0; c < rows.cols(); ++c) {
        const double diff = rows(i, c) - rows(j, c);
        d2 += diff * diff;
        ip += rows(i, c) * rows(j, c);
      }
      k(i, j) = kernels::evaluate(spec, d2, ip);
    }
  return k;
}

Matrix center_explicit(const Matrix& k) {
  const std::size_t n = k.rows();
  Matrix h = Matrix::identity(n);
  for (double& v : h.data()) v -= 1.0 / static_cast<double>(n);
  return matmul(matmul(h, k), h);
}

double hsic_explicit(const Matrix& x, const Matrix& s, const kernels::KernelSpec& kx, const kernels::KernelSpec& ks) {
  const std::size_t l = x.rows();
  Matrix h = Matrix::identity(l);
  for (double& v : h.data()) v -= 1.0 / static_cast<double>(l);
  const Matrix prod = matmul(matmul(matmul(serial::gram(kx, x), h), serial::gram(ks, s)), h);
  double tr = 0.0;
  for (std::size_t i = 0; i < l; ++i) tr += prod(i, i);
  return tr / static_cast<double>(l * l);
}

std::vector<eval::RankedResult> exact_retrieve(const Matrix& queries, const Matrix& corpus, std::size_t k,
                                               eval::Score score) {
  std::vector<eval::RankedResult> out;
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    std::vector<eval::Hit> hits;
    for (std::size_t j = 0; j < corpus.rows(); ++j) {
      double ip = 0.0, qq = 0.0, dd = 0.0;
      for (std::size_t c = 0; c < corpus.cols(); ++c) {
        ip += queries(q, c) * corpus(j, c);
        qq += queries(q, c) * queries(q, c);
        dd += corpus(j, c) * corpus(j, c);
      }
      double s = ip;
      if (score == eval::Score::Cosine) s = (qq > 0.0 && dd > 0.0) ? ip / (std::sqrt(qq) * std::sqrt(dd)) : 0.0;
      hits.push_back({j, s});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const eval::Hit& a, const eval::Hit& b) { return a.score > b.score; });
    hits.resize(std::min(k, hits.size()));
    out.push_back({q, std::move(hits)});
  }
  return out;
}

Matrix covariance(const Matrix& e) {
  const std::size_t n = e.rows(), d = e.cols();
  Matrix centered = e;
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += e(i, j);
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) centered(i, j) -= m;
  }
  Matrix cov(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += centered(i, a) * centered(i, b);
      cov(a, b) = s / static_cast<double>(n - 1);
    }
  return cov;
}

}  // namespace ibkd::serial
