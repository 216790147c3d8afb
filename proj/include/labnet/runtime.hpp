#pragma once

#include <string>

namespace labnet {

// OpenBLAS picks a generic SSE3 kernel when it does not recognise the CPU
// model, which costs 2-3x on conv GEMMs. When that happens on a CPU with
// AVX2/AVX-512 this re-executes the binary with OPENBLAS_CORETYPE set.
// No-op if the variable is already set or LABNET_NO_BLAS_TUNE is defined.
void tune_blas_runtime(char** argv);

std::string blas_core_name();

}  // namespace labnet
