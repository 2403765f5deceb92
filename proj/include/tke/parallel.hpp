#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace tke {

// Worker cap from TKE_FORGE_THREADS, falling back to hardware concurrency.
std::size_t default_thread_count();

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
// visited exactly once; callers write results by index so the outcome does not
// depend on scheduling. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body);

// Deterministic per-task seed derivation (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace tke
