#pragma once

#include <cstddef>
#include <functional>

namespace copulahmm {

// Caps the worker count used by parallel_chunks. 0 restores the default
// (hardware concurrency).
void set_num_threads(unsigned n);
unsigned num_threads();

// Splits [0, n) into a fixed number of chunks that does not depend on the
// thread count, and runs body(chunk, begin, end) for each. Callers that keep
// one accumulator per chunk and reduce in chunk order get results that are
// bit-identical for any thread count.
inline constexpr std::size_t kChunkCount = 32;
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

}  // namespace copulahmm
