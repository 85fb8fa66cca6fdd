#pragma once

#include <atomic>
#include <cstddef>
#include <vector>

namespace tost::alloc_stats {

// Process-wide accounting of bytes requested through tracked containers.
// Benchmarks use this instead of OS RSS so memory numbers are reproducible
// across machines. Counters are atomic; peak tracking is exact when the
// measured section runs single-threaded (the benchmark default).

namespace detail {
inline std::atomic<std::size_t>& current() {
  static std::atomic<std::size_t> v{0};
  return v;
}
inline std::atomic<std::size_t>& peak() {
  static std::atomic<std::size_t> v{0};
  return v;
}
inline std::atomic<std::size_t>& total() {
  static std::atomic<std::size_t> v{0};
  return v;
}

inline void on_allocate(std::size_t bytes) {
  total().fetch_add(bytes, std::memory_order_relaxed);
  std::size_t now = current().fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::size_t prev = peak().load(std::memory_order_relaxed);
  while (prev < now &&
         !peak().compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
  }
}

inline void on_deallocate(std::size_t bytes) {
  current().fetch_sub(bytes, std::memory_order_relaxed);
}
}  // namespace detail

inline void reset() {
  detail::current().store(0);
  detail::peak().store(0);
  detail::total().store(0);
}

inline std::size_t current_bytes() { return detail::current().load(); }
inline std::size_t peak_bytes() { return detail::peak().load(); }
inline std::size_t total_bytes() { return detail::total().load(); }

// Allocator that reports every allocation to the counters above.
template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    detail::on_allocate(n * sizeof(T));
    return static_cast<T*>(::operator new(n * sizeof(T)));
  }
  void deallocate(T* p, std::size_t n) noexcept {
    detail::on_deallocate(n * sizeof(T));
    ::operator delete(p);
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
  template <typename U>
  bool operator!=(const TrackingAllocator<U>&) const noexcept {
    return false;
  }
};

template <typename T>
using tracked_vector = std::vector<T, TrackingAllocator<T>>;

// Resets the counters on entry; peak_bytes() after the measured section
// reports the high-water mark of the scope.
struct Scope {
  Scope() { reset(); }
  std::size_t peak() const { return peak_bytes(); }
};

}  // namespace tost::alloc_stats
