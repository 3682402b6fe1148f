#pragma once

#include <cstddef>

// Dense arithmetic kernels behind the tensor ops. Every kernel has a scalar
// reference implementation; on x86-64 an AVX2 variant is selected at runtime.
// SIMD variants vectorize across independent output elements only, so each
// output accumulates its terms in the same order as the scalar reference and
// the two backends produce bitwise identical results.

namespace vqseg::kernels {

struct Ops {
  const char* name;

  // y[i] = max(x[i], 0)
  void (*relu)(const double* x, double* y, std::size_t n);
  // gx[i] += (x[i] > 0) ? gy[i] : 0.0
  void (*relu_backward)(const double* x, const double* gy, double* gx,
                        std::size_t n);
  // out[i] = a[i] + b[i]
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  // dst[i] += src[i]
  void (*accumulate)(double* dst, const double* src, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  // out[i,j] = (bias ? bias[i] : 0) + sum_k a[i,k] * b[k,j]
  // a: m x k, b: k x n, out: m x n, all row-major. k ascending per output.
  void (*matmul_bias)(double* out, const double* a, const double* b,
                      const double* bias, std::size_t m, std::size_t k,
                      std::size_t n);
  // out[p,j] += sum_i a[i,p] * b[i,j]      (a: m x k, b: m x n, out: k x n)
  void (*matmul_at_b_acc)(double* out, const double* a, const double* b,
                          std::size_t m, std::size_t k, std::size_t n);
  // out[i,p] += sum_j a[i,j] * b[p,j]      (a: m x n, b: k x n, out: m x k)
  void (*matmul_abt_acc)(double* out, const double* a, const double* b,
                         std::size_t m, std::size_t n, std::size_t k);

  // 1-D cross-correlation with "same" zero padding, no bias.
  // x: ci x t, w: co x ci x ksz (ksz odd), out: co x t, accumulated into out
  // as given (callers zero it first). Taps outside [0,t) contribute nothing.
  void (*conv1d_same)(double* out, const double* x, const double* w,
                      std::size_t co, std::size_t ci, std::size_t t,
                      std::size_t ksz, std::size_t dil);
  // gx[ic,s] += sum_{oc,kk valid} w[oc,ic,kk] * gy[oc, s - off(kk)]
  void (*conv1d_same_backward_input)(double* gx, const double* gy,
                                     const double* w, std::size_t co,
                                     std::size_t ci, std::size_t t,
                                     std::size_t ksz, std::size_t dil);
  // gw[oc,ic,kk] += sum_{valid tt} gy[oc,tt] * x[ic, tt + off(kk)]
  void (*conv1d_same_backward_weight)(double* gw, const double* gy,
                                      const double* x, std::size_t co,
                                      std::size_t ci, std::size_t t,
                                      std::size_t ksz, std::size_t dil);

  // dist[j] = sum_d (point[d] - protos[j*dim + d])^2
  void (*l2_distances)(double* dist, const double* point, const double* protos,
                       std::size_t count, std::size_t dim);
  // proto[d] = (beta * proto[d] + (1 - beta) * assigned_sum[d]) / nhat
  void (*ema_combine)(double* proto, const double* assigned_sum, double beta,
                      double nhat, std::size_t dim);
  // Bias-corrected Adam. bias1 = 1 - beta1^step, bias2 = 1 - beta2^step.
  void (*adam_step)(double* param, double* m, double* v, const double* g,
                    std::size_t n, double lr, double beta1, double beta2,
                    double eps, double bias1, double bias2);
};

enum class Backend { kScalar, kAvx2 };

const Ops& scalar_ops();
bool avx2_available();     // CPU support and compiled in
const Ops& avx2_ops();     // valid only when avx2_available()

// Active backend: AVX2 when available unless overridden. The environment
// variable VQSEG_KERNELS=scalar|avx2 overrides the automatic choice.
const Ops& active();
Backend active_backend();
void select(Backend b);    // throws if backend unavailable
void select_auto();

}  // namespace vqseg::kernels
