#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "mlkmc/random.hpp"

namespace mlkmc {

/// Runs fn(i, rng_i) for i in [0, n) on up to `threads` workers. Replica i
/// always uses Rng(seed, i), and results come back in index order, so the
/// output does not depend on the thread count.
template <class Result, class Fn>
std::vector<Result> run_replicas(std::uint64_t n, std::uint64_t seed, unsigned threads, Fn fn) {
  std::vector<Result> out(n);
  if (n == 0) return out;
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::min<std::uint64_t>(n, 1024))));
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      std::uint64_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        Rng rng(seed, i);
        out[i] = fn(i, rng);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (err) std::rethrow_exception(err);
  return out;
}

inline unsigned default_threads() {
  unsigned h = std::thread::hardware_concurrency();
  return h ? h : 1u;
}

}  // namespace mlkmc
