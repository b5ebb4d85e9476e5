#pragma once

// Deterministic work partitioning for the OpenMP kernels.
//
// All parallel loops in the library follow the same pattern: the index
// space is cut into fixed chunks, each chunk produces its partial result
// into a preallocated slot, and slots are combined serially in chunk
// order. Floating-point results are therefore bit-identical for any
// thread count, and Exec::Serial runs the very same code path without
// the OpenMP pragma engaging, which is the reference the benchmark and
// the equality tests compare against.

#include <cstddef>
#include <utility>
#include <vector>

namespace uqsim {

enum class Exec { Serial, Parallel };

inline constexpr std::size_t kDefaultChunk = 64;

struct ChunkRange {
  std::size_t begin;
  std::size_t end;
};

inline std::vector<ChunkRange> make_chunks(std::size_t n, std::size_t chunk) {
  std::vector<ChunkRange> out;
  if (chunk == 0) chunk = 1;
  out.reserve(n / chunk + 1);
  for (std::size_t b = 0; b < n; b += chunk)
    out.push_back({b, std::min(b + chunk, n)});
  return out;
}

// body(chunk_index, begin, end) must only write to state owned by its
// chunk index.
template <class F>
void for_each_chunk(std::size_t n, std::size_t chunk, Exec policy, F&& body) {
  auto chunks = make_chunks(n, chunk);
  const long long nc = static_cast<long long>(chunks.size());
  const bool par = (policy == Exec::Parallel);
#pragma omp parallel for schedule(dynamic) if (par)
  for (long long c = 0; c < nc; ++c) {
    body(static_cast<std::size_t>(c), chunks[static_cast<std::size_t>(c)].begin,
         chunks[static_cast<std::size_t>(c)].end);
  }
}

}  // namespace uqsim
