#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>

namespace flowvc::dsp::detail {

/// Real FFT of fixed size backed by FFTW (FFTW_ESTIMATE plans, so results do
/// not depend on run-time planner measurements). Plan creation is serialized
/// internally; an instance itself is not shareable across threads.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  /// n real samples -> n/2+1 bins.
  void forward(const double* in, std::complex<double>* out);
  /// n/2+1 bins -> n real samples, normalized by 1/n.
  void inverse(const std::complex<double>* in, double* out);

 private:
  std::size_t n_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

}  // namespace flowvc::dsp::detail
