#include <arm_neon.h>

#include <algorithm>

#include "earlystop/simd.hpp"

namespace earlystop::simd {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

void axpy_neon(double* y, double alpha, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void rotate_neon(double* p, double* q, double c, double s, std::size_t n) {
  const float64x2_t vc = vdupq_n_f64(c);
  const float64x2_t vs = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vp = vld1q_f64(p + i);
    const float64x2_t vq = vld1q_f64(q + i);
    vst1q_f64(p + i, vfmsq_f64(vmulq_f64(vc, vp), vs, vq));
    vst1q_f64(q + i, vfmaq_f64(vmulq_f64(vc, vq), vs, vp));
  }
  for (; i < n; ++i) {
    const double pi = p[i];
    const double qi = q[i];
    p[i] = c * pi - s * qi;
    q[i] = s * pi + c * qi;
  }
}

double sum_min_neon(const double* v, double cap, std::size_t n) {
  const float64x2_t vcap = vdupq_n_f64(cap);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vminq_f64(vld1q_f64(v + i), vcap));
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) total += std::min(v[i], cap);
  return total;
}

double squared_distance_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{dot_neon, axpy_neon, rotate_neon, sum_min_neon,
                                 squared_distance_neon};
  return table;
}

}  // namespace earlystop::simd
