#pragma once

namespace decodet {

/// Caps the thread count used by the OpenMP kernels. 0 restores the
/// machine default. Kernels are written so results are bit-identical for
/// every thread count.
void set_max_threads(int n);

int max_threads();

}  // namespace decodet
