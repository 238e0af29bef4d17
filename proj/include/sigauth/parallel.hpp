#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

namespace sigauth {

inline std::size_t hardware_workers() {
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

struct TaskFailure {
  std::size_t index;
  std::exception_ptr error;
};

// Runs fn(0..n-1) on at most `workers` threads and returns the results in
// index order. Tasks share nothing through this helper; scheduling order
// cannot leak into the result. If tasks throw, every task still runs and the
// failure with the lowest index is rethrown via on_failure (or as-is).
template <typename Fn, typename OnFailure>
auto parallel_map(std::size_t n, std::size_t workers, Fn&& fn, OnFailure&& on_failure)
    -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
  using R = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};

  auto drain = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    drain();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 0; t + 1 < threads; ++t) pool.emplace_back(drain);
    drain();
  }  // jthreads join here

  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      on_failure(TaskFailure{i, errors[i]});
      std::rethrow_exception(errors[i]);  // on_failure is expected to throw
    }
  }

  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

template <typename Fn>
auto parallel_map(std::size_t n, std::size_t workers, Fn&& fn) {
  return parallel_map(n, workers, std::forward<Fn>(fn),
                      [](const TaskFailure& f) { std::rethrow_exception(f.error); });
}

}  // namespace sigauth
