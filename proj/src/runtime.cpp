#include "labnet/runtime.hpp"

#include <unistd.h>

#include <cstdlib>
#include <cstring>

extern "C" char* openblas_get_corename(void);

namespace labnet {

std::string blas_core_name() { return openblas_get_corename(); }

void tune_blas_runtime(char** argv) {
  if (std::getenv("OPENBLAS_CORETYPE") || std::getenv("LABNET_NO_BLAS_TUNE")) return;
  const std::string core = blas_core_name();
  if (core != "Prescott" && core != "Core2" && core != "Nehalem" && core != "Sandybridge") return;
  const char* target = nullptr;
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512bw")) {
    target = "SkylakeX";
  } else if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    target = "Haswell";
  }
  if (!target || target == core) return;
  setenv("OPENBLAS_CORETYPE", target, 1);
  execv("/proc/self/exe", argv);
  // exec failed: keep running on the generic kernel.
}

}  // namespace labnet
