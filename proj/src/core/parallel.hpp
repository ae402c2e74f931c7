#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace aqsgee {

/// Runs body(0..count-1) on up to `workers` threads (0 = hardware
/// concurrency). Callers write results by index, so the outcome does not depend
/// on scheduling. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body);

unsigned resolve_workers(unsigned workers);

std::uint64_t splitmix64(std::uint64_t& state);
/// Independent seed for (stream, index) under a master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace aqsgee
