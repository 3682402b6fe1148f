#include "vqseg/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

// VQSEG_HAVE_AVX2 is set by the build when src/kernels/avx2.cpp is compiled in.

namespace vqseg::kernels {

bool avx2_available() {
#if defined(VQSEG_HAVE_AVX2)
  static const bool ok = __builtin_cpu_supports("avx2");
  return ok;
#else
  return false;
#endif
}

#if !defined(VQSEG_HAVE_AVX2)
const Ops& avx2_ops() { throw std::runtime_error("avx2 kernels not built"); }
#endif

namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("VQSEG_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::kScalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_available()) return Backend::kAvx2;
  }
  return avx2_available() ? Backend::kAvx2 : Backend::kScalar;
}

Backend g_backend = initial_backend();

}  // namespace

const Ops& active() {
  return g_backend == Backend::kAvx2 ? avx2_ops() : scalar_ops();
}

Backend active_backend() { return g_backend; }

void select(Backend b) {
  if (b == Backend::kAvx2 && !avx2_available())
    throw std::runtime_error("avx2 backend unavailable on this CPU/build");
  g_backend = b;
}

void select_auto() {
  g_backend = avx2_available() ? Backend::kAvx2 : Backend::kScalar;
}

}  // namespace vqseg::kernels
