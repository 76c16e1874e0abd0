#pragma once

#include <cstddef>

namespace qasched {

/// Selects the OpenMP kernel or its serial reference. Both produce
/// bit-identical results; the serial path is kept for tests and benchmarks.
enum class Execution { serial, parallel };

/// Threads OpenMP would use for a parallel region (1 without OpenMP).
int max_threads();

}  // namespace qasched
