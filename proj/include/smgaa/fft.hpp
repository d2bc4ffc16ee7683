#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "smgaa/grid.hpp"

namespace smgaa {

namespace detail {

// FFTW planning is not thread-safe, execution with the new-array interface is.
// Plans are made for SIMD-aligned arrays with FFTW_ESTIMATE, so the chosen
// algorithm (and therefore rounding) never depends on timing measurements.
class FftPlanCache {
 public:
  static FftPlanCache& instance() {
    static FftPlanCache cache;
    return cache;
  }

  fftw_plan inverse_2d(int rows, int cols) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(rows, cols);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* buf = fftw_alloc_complex(static_cast<std::size_t>(rows) * cols);
    fftw_plan plan = fftw_plan_dft_2d(rows, cols, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_free(buf);
    plans_.emplace(key, plan);
    return plan;
  }

  ~FftPlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

/// Per-thread aligned work array of at least `count` elements.
inline std::complex<double>* fft_scratch(std::size_t count) {
  thread_local std::unique_ptr<fftw_complex, FftwFree> buf;
  thread_local std::size_t capacity = 0;
  if (capacity < count) {
    buf.reset(fftw_alloc_complex(count));
    capacity = count;
  }
  return reinterpret_cast<std::complex<double>*>(buf.get());
}

/// Unscaled in-place backward transform of an aligned rows x cols array.
inline void execute_inverse_2d(std::complex<double>* aligned, int rows, int cols) {
  fftw_plan plan = FftPlanCache::instance().inverse_2d(rows, cols);
  auto* ptr = reinterpret_cast<fftw_complex*>(aligned);
  fftw_execute_dft(plan, ptr, ptr);
}

}  // namespace detail

/// In-place 2D inverse DFT with 1/(rows*cols) scaling. Reentrant.
inline void inverse_dft_2d(Grid<std::complex<double>>& data) {
  const int rows = static_cast<int>(data.rows());
  const int cols = static_cast<int>(data.cols());
  auto* work = detail::fft_scratch(data.size());
  std::memcpy(static_cast<void*>(work), data.data(), data.size() * sizeof(std::complex<double>));
  detail::execute_inverse_2d(work, rows, cols);
  const double scale = 1.0 / (static_cast<double>(rows) * cols);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = work[i] * scale;
}

}  // namespace smgaa
