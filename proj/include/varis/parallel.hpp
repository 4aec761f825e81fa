#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "varis/model.hpp"

namespace varis {

/// Work is cut into fixed-size chunks so results never depend on the
/// thread count; partial results come back in chunk order.
inline constexpr std::size_t kCompletionChunk = 1 << 12;

inline int available_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace detail {

// Sets `x` at `vars` to the mixed-radix digits of `index` (last var fastest).
inline void decode_completion(std::vector<int>& x, std::span<const VarId> vars, std::span<const int> cards,
                              std::size_t index) {
  for (std::size_t k = vars.size(); k-- > 0;) {
    const auto c = static_cast<std::size_t>(cards[vars[k]]);
    x[vars[k]] = static_cast<int>(index % c);
    index /= c;
  }
}

template <typename Partial, typename Visit>
Partial run_completion_chunk(const std::vector<int>& base, std::span<const VarId> vars, std::span<const int> cards,
                             std::size_t first, std::size_t count, Visit& visit) {
  Partial acc{};
  std::vector<int> x = base;
  decode_completion(x, vars, cards, first);
  for (std::size_t i = 0; i < count; ++i) {
    visit(acc, static_cast<const std::vector<int>&>(x));
    next_assignment(x, vars, cards);
  }
  return acc;
}

}  // namespace detail

inline std::size_t completion_count(std::span<const VarId> vars, std::span<const int> cards) {
  std::size_t n = 1;
  for (VarId v : vars) n *= static_cast<std::size_t>(cards[v]);
  return n;
}

/// Serial reference: visits every completion of `base` over `vars`, one
/// accumulator per chunk, in chunk order.
template <typename Partial, typename Visit>
std::vector<Partial> map_completion_chunks_serial(const std::vector<int>& base, std::span<const VarId> vars,
                                                  std::span<const int> cards, Visit visit) {
  const std::size_t total = completion_count(vars, cards);
  const std::size_t chunks = (total + kCompletionChunk - 1) / kCompletionChunk;
  std::vector<Partial> out(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t first = c * kCompletionChunk;
    out[c] = detail::run_completion_chunk<Partial>(base, vars, cards, first,
                                                   std::min(kCompletionChunk, total - first), visit);
  }
  return out;
}

/// OpenMP version of map_completion_chunks_serial; bit-identical output.
/// `visit` must be safe to call concurrently.
template <typename Partial, typename Visit>
std::vector<Partial> map_completion_chunks(const std::vector<int>& base, std::span<const VarId> vars,
                                           std::span<const int> cards, Visit visit, int threads = 0) {
  const std::size_t total = completion_count(vars, cards);
  const std::size_t chunks = (total + kCompletionChunk - 1) / kCompletionChunk;
  std::vector<Partial> out(chunks);
  const auto n = static_cast<long long>(chunks);
  if (threads <= 0) threads = available_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (chunks > 1)
  for (long long c = 0; c < n; ++c) {
    const std::size_t first = static_cast<std::size_t>(c) * kCompletionChunk;
    Visit local = visit;
    out[static_cast<std::size_t>(c)] = detail::run_completion_chunk<Partial>(
        base, vars, cards, first, std::min(kCompletionChunk, total - first), local);
  }
  return out;
}

}  // namespace varis
