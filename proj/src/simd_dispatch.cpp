#include <atomic>
#include <cstdlib>
#include <string>

#include "earlystop/errors.hpp"
#include "earlystop/simd.hpp"

namespace earlystop::simd {
namespace {

Isa detect() {
#if defined(EARLYSTOP_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::kAvx2;
#endif
#if defined(EARLYSTOP_HAVE_NEON)
  return Isa::kNeon;
#endif
  return Isa::kScalar;
}

Isa resolve_initial() {
  const char* env = std::getenv("EARLYSTOP_SIMD");
  if (env == nullptr || std::string(env) == "auto" || std::string(env).empty()) return detect();
  const std::string req(env);
  if (req == "scalar") return Isa::kScalar;
  if (req == "avx2" && isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  if (req == "neon" && isa_supported(Isa::kNeon)) return Isa::kNeon;
  throw ConfigError("EARLYSTOP_SIMD=" + req + " is not available on this build/CPU");
}

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Isa> g_isa{Isa::kScalar};

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(EARLYSTOP_HAVE_AVX2)
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(EARLYSTOP_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

const KernelTable& table_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw ConfigError("SIMD variant " + std::string(isa_name(isa)) + " unavailable");
  }
  switch (isa) {
#if defined(EARLYSTOP_HAVE_AVX2)
    case Isa::kAvx2:
      return avx2_table();
#endif
#if defined(EARLYSTOP_HAVE_NEON)
    case Isa::kNeon:
      return neon_table();
#endif
    default:
      return scalar_table();
  }
}

void set_active_isa(Isa isa) {
  const KernelTable& t = table_for(isa);
  g_isa.store(isa);
  g_table.store(&t);
}

const KernelTable& active() {
  const KernelTable* t = g_table.load(std::memory_order_acquire);
  if (t == nullptr) {
    set_active_isa(resolve_initial());
    t = g_table.load(std::memory_order_acquire);
  }
  return *t;
}

Isa active_isa() {
  active();
  return g_isa.load();
}

}  // namespace earlystop::simd
