#pragma once

// Replicate runner. Replicate r always draws from StreamRng(seed, r) and its
// result lands in slot r, so the reduced output does not depend on the
// thread count or on scheduling.

#include <omp.h>

#include <cstdint>
#include <exception>
#include <optional>
#include <type_traits>
#include <vector>

namespace gfperc {

/// Per-thread workspace factory `make()` and body `body(workspace, r)`.
template <class Make, class Body>
auto run_replicates(std::uint64_t n, Make&& make, Body&& body) {
  using Ws = std::invoke_result_t<Make&>;
  using T = std::invoke_result_t<Body&, Ws&, std::uint64_t>;
  // vector<bool> packs bits, so concurrent writes to neighboring slots race.
  static_assert(!std::is_same_v<T, bool>, "return std::uint8_t instead of bool");
  std::vector<T> out(n);
  std::exception_ptr error;
  const auto count = static_cast<long long>(n);
#pragma omp parallel
  {
    // Every thread must reach the worksharing loop, even if its workspace
    // could not be built.
    std::optional<Ws> ws;
    try {
      ws.emplace(make());
    } catch (...) {
#pragma omp critical(gfperc_replicate_error)
      if (!error) error = std::current_exception();
    }
#pragma omp for schedule(dynamic, 16)
    for (long long r = 0; r < count; ++r) {
      if (!ws) continue;
      try {
        out[static_cast<std::size_t>(r)] = body(*ws, static_cast<std::uint64_t>(r));
      } catch (...) {
#pragma omp critical(gfperc_replicate_error)
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

/// Serial reference with the same contract.
template <class Make, class Body>
auto run_replicates_serial(std::uint64_t n, Make&& make, Body&& body) {
  using Ws = std::invoke_result_t<Make&>;
  using T = std::invoke_result_t<Body&, Ws&, std::uint64_t>;
  std::vector<T> out;
  out.reserve(n);
  Ws ws = make();
  for (std::uint64_t r = 0; r < n; ++r) out.push_back(body(ws, r));
  return out;
}

struct NoWorkspace {};
inline NoWorkspace no_workspace() { return {}; }

/// Sets the OpenMP team size; 0 keeps the runtime default.
inline void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

inline int thread_count() { return omp_get_max_threads(); }

}  // namespace gfperc
