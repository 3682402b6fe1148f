#include "vqseg/kernels.hpp"

// AVX2 kernels. Compiled with -mavx2 -mno-fma -ffp-contract=off: every lane
// performs the same exactly-rounded mul/add sequence as the scalar reference,
// so results are bitwise identical. Vectorization is always across independent
// output elements; reductions stay sequential per output.

#if defined(__AVX2__)

#include <immintrin.h>

#include <cmath>

namespace vqseg::kernels {
namespace {

void relu_v(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_v(const double* x, const double* gy, double* gx,
                     std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d sel = _mm256_and_pd(mask, _mm256_loadu_pd(gy + i));
    _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), sel));
  }
  for (; i < n; ++i) gx[i] += x[i] > 0.0 ? gy[i] : 0.0;
}

void add_v(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i,
                     _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void accumulate_v(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i),
                                            _mm256_loadu_pd(src + i)));
  for (; i < n; ++i) dst[i] += src[i];
}

void axpy_v(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d term = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), term));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void matmul_bias_v(double* out, const double* a, const double* b,
                   const double* bias, std::size_t m, std::size_t k,
                   std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double bv = bias ? bias[i] : 0.0;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d acc = _mm256_set1_pd(bv);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_set1_pd(arow[p]);
        acc = _mm256_add_pd(acc,
                            _mm256_mul_pd(av, _mm256_loadu_pd(b + p * n + j)));
      }
      _mm256_storeu_pd(out + i * n + j, acc);
    }
    for (; j < n; ++j) {
      double acc = bv;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * n + j];
      out[i * n + j] = acc;
    }
  }
}

void matmul_at_b_acc_v(double* out, const double* a, const double* b,
                       std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    double* orow = out + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      const double* brow = b + i * n;
      const __m256d avv = _mm256_set1_pd(av);
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        const __m256d term = _mm256_mul_pd(avv, _mm256_loadu_pd(brow + j));
        _mm256_storeu_pd(orow + j, _mm256_add_pd(_mm256_loadu_pd(orow + j), term));
      }
      for (; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_abt_acc_v(double* out, const double* a, const double* b,
                      std::size_t m, std::size_t n, std::size_t k) {
  const __m256i stride =
      _mm256_setr_epi64x(0, static_cast<long long>(n),
                         static_cast<long long>(2 * n),
                         static_cast<long long>(3 * n));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      __m256d acc = _mm256_loadu_pd(out + i * k + p);
      const double* bbase = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const __m256d bv = _mm256_i64gather_pd(bbase + j, stride, 8);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(arow[j]), bv));
      }
      _mm256_storeu_pd(out + i * k + p, acc);
    }
    for (; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = out[i * k + p];
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      out[i * k + p] = acc;
    }
  }
}

// Shifted accumulate: dst[t] += wv * src[t + off] over [t0, t1).
inline void shifted_axpy(double* dst, const double* src, double wv,
                         std::ptrdiff_t t0, std::ptrdiff_t t1,
                         std::ptrdiff_t off) {
  const __m256d wvv = _mm256_set1_pd(wv);
  std::ptrdiff_t tt = t0;
  for (; tt + 4 <= t1; tt += 4) {
    const __m256d term = _mm256_mul_pd(wvv, _mm256_loadu_pd(src + tt + off));
    _mm256_storeu_pd(dst + tt,
                     _mm256_add_pd(_mm256_loadu_pd(dst + tt), term));
  }
  for (; tt < t1; ++tt) dst[tt] += wv * src[tt + off];
}

void conv1d_same_v(double* out, const double* x, const double* w,
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
        const std::ptrdiff_t t0 = off < 0 ? -off : 0;
        const std::ptrdiff_t t1 = off > 0 ? st - off : st;
        shifted_axpy(out + oc * t, x + ic * t, w[(oc * ci + ic) * ksz + kk],
                     t0, t1, off);
      }
}

void conv1d_same_backward_input_v(double* gx, const double* gy,
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
        const std::ptrdiff_t t0 = off < 0 ? -off : 0;
        const std::ptrdiff_t t1 = off > 0 ? st - off : st;
        // gx[tt + off] += wv * gy[tt] for tt in [t0, t1); substitute
        // u = tt + off so the destination walk is contiguous from u0.
        shifted_axpy(gx + ic * t, gy + oc * t,
                     w[(oc * ci + ic) * ksz + kk], t0 + off, t1 + off, -off);
      }
}

void l2_distances_v(double* dist, const double* point, const double* protos,
                    std::size_t count, std::size_t dim) {
  const __m256i stride =
      _mm256_setr_epi64x(0, static_cast<long long>(dim),
                         static_cast<long long>(2 * dim),
                         static_cast<long long>(3 * dim));
  std::size_t j = 0;
  for (; j + 4 <= count; j += 4) {
    const double* zbase = protos + j * dim;
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m256d zv = _mm256_i64gather_pd(zbase + d, stride, 8);
      const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(point[d]), zv);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(dist + j, acc);
  }
  for (; j < count; ++j) {
    const double* z = protos + j * dim;
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = point[d] - z[d];
      acc += diff * diff;
    }
    dist[j] = acc;
  }
}

void ema_combine_v(double* proto, const double* assigned_sum, double beta,
                   double nhat, std::size_t dim) {
  const double one_minus = 1.0 - beta;
  const __m256d bv = _mm256_set1_pd(beta);
  const __m256d ov = _mm256_set1_pd(one_minus);
  const __m256d nv = _mm256_set1_pd(nhat);
  std::size_t d = 0;
  for (; d + 4 <= dim; d += 4) {
    const __m256d num =
        _mm256_add_pd(_mm256_mul_pd(bv, _mm256_loadu_pd(proto + d)),
                      _mm256_mul_pd(ov, _mm256_loadu_pd(assigned_sum + d)));
    _mm256_storeu_pd(proto + d, _mm256_div_pd(num, nv));
  }
  for (; d < dim; ++d)
    proto[d] = (beta * proto[d] + one_minus * assigned_sum[d]) / nhat;
}

void adam_step_v(double* param, double* m, double* v, const double* g,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, double bias1, double bias2) {
  const double om1 = 1.0 - beta1;
  const double om2 = 1.0 - beta2;
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d o1 = _mm256_set1_pd(om1);
  const __m256d o2 = _mm256_set1_pd(om2);
  const __m256d c1 = _mm256_set1_pd(bias1);
  const __m256d c2 = _mm256_set1_pd(bias2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d mv = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(o1, gv));
    const __m256d vv =
        _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                      _mm256_mul_pd(o2, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_div_pd(mv, c1);
    const __m256d vhat = _mm256_div_pd(vv, c2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom);
    _mm256_storeu_pd(param + i,
                     _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + om1 * g[i];
    v[i] = beta2 * v[i] + om2 * (g[i] * g[i]);
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops = {
      "avx2",
      relu_v,
      relu_backward_v,
      add_v,
      accumulate_v,
      axpy_v,
      matmul_bias_v,
      matmul_at_b_acc_v,
      matmul_abt_acc_v,
      conv1d_same_v,
      conv1d_same_backward_input_v,
      scalar_ops().conv1d_same_backward_weight,  // pure reduction, no lane split
      l2_distances_v,
      ema_combine_v,
      adam_step_v,
  };
  return ops;
}

}  // namespace vqseg::kernels

#endif  // __AVX2__
