#include "htds/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace htds::kernels {
namespace {

void prepare(Matrix& c, std::size_t m, std::size_t n, bool accumulate) {
  if (accumulate) {
    if (c.rows() != m || c.cols() != n) throw std::invalid_argument("gemm: output shape mismatch");
  } else {
    if (c.rows() != m || c.cols() != n) {
      c.resize(m, n);
    } else {
      c.set_zero();
    }
  }
}

bool go_parallel(std::size_t m, std::size_t n, std::size_t k) {
  return m > 1 && m * n * k >= kParallelWork;
}

}  // namespace

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.cols() != b.rows()) throw std::invalid_argument("gemm_nn: inner dimension mismatch");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  prepare(c, m, n, accumulate);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m, n, k))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* ci = pc + i * n;
    const double* ai = pa + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.cols() != b.cols()) throw std::invalid_argument("gemm_nt: inner dimension mismatch");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  prepare(c, m, n, accumulate);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m, n, k))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const double* ai = pa + i * k;
    double* ci = pc + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = pb + j * k;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        s0 += ai[p] * bj[p];
        s1 += ai[p + 1] * bj[p + 1];
        s2 += ai[p + 2] * bj[p + 2];
        s3 += ai[p + 3] * bj[p + 3];
      }
      for (; p < k; ++p) s0 += ai[p] * bj[p];
      ci[j] += (s0 + s1) + (s2 + s3);
    }
  }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.rows() != b.rows()) throw std::invalid_argument("gemm_tn: inner dimension mismatch");
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  prepare(c, m, n, accumulate);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m, n, k))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* ci = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[p * m + i];
      const double* bp = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void softmax_rows(Matrix& m) {
  const std::size_t n = m.cols();
  const auto rows = static_cast<std::ptrdiff_t>(m.rows());
  double* base = m.data();
#pragma omp parallel for schedule(static) if (m.size() >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* r = base + i * n;
    double mx = r[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, r[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < n; ++j) r[j] *= inv;
  }
}

}  // namespace htds::kernels
