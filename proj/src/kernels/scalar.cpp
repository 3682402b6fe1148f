#include "vqseg/kernels.hpp"

#include <cmath>

// Reference kernels. Reduction order is sequential over the canonical index
// order; the AVX2 variants must match these bitwise.

namespace vqseg::kernels {
namespace {

void relu_s(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_s(const double* x, const double* gy, double* gx,
                     std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] > 0.0 ? gy[i] : 0.0;
}

void add_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void accumulate_s(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

void axpy_s(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void matmul_bias_s(double* out, const double* a, const double* b,
                   const double* bias, std::size_t m, std::size_t k,
                   std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = bias ? bias[i] : 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * n + j];
      out[i * n + j] = acc;
    }
  }
}

void matmul_at_b_acc_s(double* out, const double* a, const double* b,
                       std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      const double* brow = b + i * n;
      double* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
}

void matmul_abt_acc_s(double* out, const double* a, const double* b,
                      std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = a + i * n;
      const double* brow = b + p * n;
      double acc = out[i * k + p];
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      out[i * k + p] = acc;
    }
}

void conv1d_same_s(double* out, const double* x, const double* w,
                   std::size_t co, std::size_t ci, std::size_t t,
                   std::size_t ksz, std::size_t dil) {
  const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(ksz - 1) / 2;
  const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t);
  for (std::size_t oc = 0; oc < co; ++oc)
    for (std::size_t ic = 0; ic < ci; ++ic)
      for (std::size_t kk = 0; kk < ksz; ++kk) {
        const std::ptrdiff_t off =
            (static_cast<std::ptrdiff_t>(kk) - center) *
            static_cast<std::ptrdiff_t>(dil);
        const double wv = w[(oc * ci + ic) * ksz + kk];
        const std::ptrdiff_t t0 = off < 0 ? -off : 0;
        const std::ptrdiff_t t1 = off > 0 ? st - off : st;
        double* orow = out + oc * t;
        const double* xrow = x + ic * t;
        for (std::ptrdiff_t tt = t0; tt < t1; ++tt)
          orow[tt] += wv * xrow[tt + off];
      }
}

void conv1d_same_backward_input_s(double* gx, const double* gy,
                                  const double* w, std::size_t co,
                                  std::size_t ci, std::size_t t,
                                  std::size_t ksz, std::size_t dil) {
  const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(ksz - 1) / 2;
  const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t);
  for (std::size_t ic = 0; ic < ci; ++ic)
    for (std::size_t oc = 0; oc < co; ++oc)
      for (std::size_t kk = 0; kk < ksz; ++kk) {
        const std::ptrdiff_t off =
            (static_cast<std::ptrdiff_t>(kk) - center) *
            static_cast<std::ptrdiff_t>(dil);
        const double wv = w[(oc * ci + ic) * ksz + kk];
        const std::ptrdiff_t t0 = off < 0 ? -off : 0;
        const std::ptrdiff_t t1 = off > 0 ? st - off : st;
        double* grow = gx + ic * t;
        const double* gyrow = gy + oc * t;
        for (std::ptrdiff_t tt = t0; tt < t1; ++tt)
          grow[tt + off] += wv * gyrow[tt];
      }
}

void conv1d_same_backward_weight_s(double* gw, const double* gy,
                                   const double* x, std::size_t co,
                                   std::size_t ci, std::size_t t,
                                   std::size_t ksz, std::size_t dil) {
  const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(ksz - 1) / 2;
  const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t);
  for (std::size_t oc = 0; oc < co; ++oc)
    for (std::size_t ic = 0; ic < ci; ++ic)
      for (std::size_t kk = 0; kk < ksz; ++kk) {
        const std::ptrdiff_t off =
            (static_cast<std::ptrdiff_t>(kk) - center) *
            static_cast<std::ptrdiff_t>(dil);
        const std::ptrdiff_t t0 = off < 0 ? -off : 0;
        const std::ptrdiff_t t1 = off > 0 ? st - off : st;
        const double* gyrow = gy + oc * t;
        const double* xrow = x + ic * t;
        double acc = gw[(oc * ci + ic) * ksz + kk];
        for (std::ptrdiff_t tt = t0; tt < t1; ++tt)
          acc += gyrow[tt] * xrow[tt + off];
        gw[(oc * ci + ic) * ksz + kk] = acc;
      }
}

void l2_distances_s(double* dist, const double* point, const double* protos,
                    std::size_t count, std::size_t dim) {
  for (std::size_t j = 0; j < count; ++j) {
    const double* z = protos + j * dim;
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = point[d] - z[d];
      acc += diff * diff;
    }
    dist[j] = acc;
  }
}

void ema_combine_s(double* proto, const double* assigned_sum, double beta,
                   double nhat, std::size_t dim) {
  const double one_minus = 1.0 - beta;
  for (std::size_t d = 0; d < dim; ++d)
    proto[d] = (beta * proto[d] + one_minus * assigned_sum[d]) / nhat;
}

void adam_step_s(double* param, double* m, double* v, const double* g,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, double bias1, double bias2) {
  const double om1 = 1.0 - beta1;
  const double om2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + om1 * g[i];
    v[i] = beta2 * v[i] + om2 * (g[i] * g[i]);
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar",
      relu_s,
      relu_backward_s,
      add_s,
      accumulate_s,
      axpy_s,
      matmul_bias_s,
      matmul_at_b_acc_s,
      matmul_abt_acc_s,
      conv1d_same_s,
      conv1d_same_backward_input_s,
      conv1d_same_backward_weight_s,
      l2_distances_s,
      ema_combine_s,
      adam_step_s,
  };
  return ops;
}

}  // namespace vqseg::kernels
