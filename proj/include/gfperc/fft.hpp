#pragma once

// Thin RAII layer over FFTW3. Plans are created with FFTW_ESTIMATE so the
// chosen algorithm (and therefore every rounding) is identical run to run.

#include <fftw3.h>

#include <cstddef>
#include <mutex>
#include <new>
#include <utility>

namespace gfperc {

/// Planner calls are not thread-safe in FFTW; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
class FftwBuffer {
 public:
  FftwBuffer() = default;
  explicit FftwBuffer(std::size_t n) : data_(static_cast<T*>(fftw_malloc(sizeof(T) * n))), size_(n) {
    if (n > 0 && data_ == nullptr) throw std::bad_alloc();
  }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  FftwBuffer(FftwBuffer&& other) noexcept
      : data_(std::exchange(other.data_, nullptr)), size_(std::exchange(other.size_, 0)) {}
  FftwBuffer& operator=(FftwBuffer&& other) noexcept {
    if (this != &other) {
      fftw_free(data_);
      data_ = std::exchange(other.data_, nullptr);
      size_ = std::exchange(other.size_, 0);
    }
    return *this;
  }
  ~FftwBuffer() { fftw_free(data_); }

  T* data() { return data_; }
  const T* data() const { return data_; }
  std::size_t size() const { return size_; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T* begin() { return data_; }
  T* end() { return data_ + size_; }

 private:
  T* data_ = nullptr;
  std::size_t size_ = 0;
};

using FftwReal = FftwBuffer<double>;
using FftwComplex = FftwBuffer<fftw_complex>;

class FftwPlan {
 public:
  static FftwPlan r2c_2d(int n0, int n1, double* in, fftw_complex* out) {
    std::lock_guard lock(fftw_planner_mutex());
    return FftwPlan(fftw_plan_dft_r2c_2d(n0, n1, in, out, FFTW_ESTIMATE));
  }
  static FftwPlan c2r_2d(int n0, int n1, fftw_complex* in, double* out) {
    std::lock_guard lock(fftw_planner_mutex());
    return FftwPlan(fftw_plan_dft_c2r_2d(n0, n1, in, out, FFTW_ESTIMATE));
  }

  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  FftwPlan(FftwPlan&& other) noexcept : plan_(std::exchange(other.plan_, nullptr)) {}
  FftwPlan& operator=(FftwPlan&& other) noexcept {
    if (this != &other) {
      destroy();
      plan_ = std::exchange(other.plan_, nullptr);
    }
    return *this;
  }
  ~FftwPlan() { destroy(); }

  void execute() const { fftw_execute(plan_); }
  /// New-array execution; arrays must have the planned alignment (fftw_malloc).
  void execute_r2c(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(plan_, in, out); }
  void execute_c2r(fftw_complex* in, double* out) const { fftw_execute_dft_c2r(plan_, in, out); }

 private:
  explicit FftwPlan(fftw_plan plan) : plan_(plan) {
    if (plan_ == nullptr) throw std::bad_alloc();
  }
  void destroy() {
    if (plan_ != nullptr) {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
      plan_ = nullptr;
    }
  }
  fftw_plan plan_ = nullptr;
};

}  // namespace gfperc
