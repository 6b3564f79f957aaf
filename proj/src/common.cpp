#include "fusemil/common.hpp"

#include <iostream>
#include <mutex>

namespace fusemil {

namespace {
std::function<void(const std::string&)>& warn_sink() {
  static std::function<void(const std::string&)> sink;
  return sink;
}
std::mutex warn_mutex;
}  // namespace

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(warn_mutex);
  if (warn_sink()) {
    warn_sink()(message);
  } else {
    std::cerr << "[fusemil] warning: " << message << "\n";
  }
}

void set_warn_sink(std::function<void(const std::string&)> sink) {
  std::lock_guard<std::mutex> lock(warn_mutex);
  warn_sink() = std::move(sink);
}

void parallel_for(int n, int n_threads, const std::function<void(int)>& body) {
  if (n <= 0) return;
  if (n_threads <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  const int workers = std::min(n_threads, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      // Contiguous static partition: worker w owns [lo, hi).
      const int lo = static_cast<int>(static_cast<long long>(n) * w / workers);
      const int hi = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
      try {
        for (int i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace fusemil
