#pragma once
// Data-parallel inner loops used by the numerical modules.
//
// Every kernel has a scalar reference implementation; vectorized variants
// (AVX2+FMA on x86-64, NEON on aarch64) are picked once at startup from the
// CPU features. EARLYSTOP_SIMD=scalar|avx2|neon|auto overrides the choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace earlystop::simd {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
  // (p, q) <- (c p - s q, s p + c q)
  void (*rotate)(double* p, double* q, double c, double s, std::size_t n);
  // sum_i min(v[i], cap)
  double (*sum_min)(const double* v, double cap, std::size_t n);
  // sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

bool isa_supported(Isa isa);
std::string_view isa_name(Isa isa);

// Active ISA; resolved lazily on first use.
Isa active_isa();
const KernelTable& active();
const KernelTable& table_for(Isa isa);

// Switch the active table (tests and the CLI use this); throws ConfigError
// when the ISA is not available on this CPU.
void set_active_isa(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(std::span<double> y, double alpha, std::span<const double> x) {
  active().axpy(y.data(), alpha, x.data(), y.size());
}
inline void rotate(std::span<double> p, std::span<double> q, double c, double s) {
  active().rotate(p.data(), q.data(), c, s, p.size());
}
inline double sum_min(std::span<const double> v, double cap) {
  return active().sum_min(v.data(), cap, v.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

}  // namespace earlystop::simd
