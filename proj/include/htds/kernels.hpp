#pragma once

#include "htds/tensor.hpp"

// Dense kernels used by the transformer layers.
//
// The default namespace holds OpenMP-parallel versions. Work is split over
// output rows only, and every output element is reduced by exactly one thread
// in a fixed order, so results do not depend on the thread count.
// htds::kernels::serial holds naive reference loops kept for tests and
// benchmarks.
namespace htds::kernels {

// C (+)= A * B        A: m x k, B: k x n
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// C (+)= A * B^T      A: m x k, B: n x k
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// C (+)= A^T * B      A: k x m, B: k x n
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);

// Numerically stable in-place softmax of each row.
void softmax_rows(Matrix& m);

// Work (m*n*k) below which the parallel kernels stay on one thread.
inline constexpr std::size_t kParallelWork = 1 << 15;

namespace serial {
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void softmax_rows(Matrix& m);
}  // namespace serial

}  // namespace htds::kernels
