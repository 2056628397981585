#include "fft.hpp"

#include <algorithm>
#include <mutex>
#include <new>

namespace flowvc::dsp::detail {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  std::lock_guard<std::mutex> lock(planner_mutex());
  real_ = fftw_alloc_real(n);
  spec_ = fftw_alloc_complex(n / 2 + 1);
  if (!real_ || !spec_) throw std::bad_alloc();
  const int len = static_cast<int>(n);
  forward_ = fftw_plan_dft_r2c_1d(len, real_, spec_, FFTW_ESTIMATE);
  inverse_ = fftw_plan_dft_c2r_1d(len, spec_, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(forward_);
  fftw_destroy_plan(inverse_);
  fftw_free(real_);
  fftw_free(spec_);
}

void RealFft::forward(const double* in, std::complex<double>* out) {
  std::copy_n(in, n_, real_);
  fftw_execute(forward_);
  const auto* src = reinterpret_cast<const std::complex<double>*>(spec_);
  std::copy_n(src, n_ / 2 + 1, out);
}

void RealFft::inverse(const std::complex<double>* in, double* out) {
  std::copy_n(in, n_ / 2 + 1, reinterpret_cast<std::complex<double>*>(spec_));
  fftw_execute(inverse_);
  const double norm = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = real_[i] * norm;
}

}  // namespace flowvc::dsp::detail
