#pragma once

#include <cstdint>
#include <functional>

namespace gdopt {

/// Runs fn(i) for i in [0, n). Work is chunked over up to `threads` workers;
/// callers must make iterations independent (the samplers write disjoint rows).
void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t)>& fn);

}  // namespace gdopt
