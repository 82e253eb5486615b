#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace multix {

/// Worker count from MULTIX_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Work is split into contiguous chunks, so
/// results written to per-index slots do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Derives an independent stream seed from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace multix
