// Thin RAII layer over FFTW for the transform shapes the solvers need.
#ifndef QNL_FFT_HPP
#define QNL_FFT_HPP

#include <memory>

#include "qnl/model.hpp"

namespace qnl {

/// In-place, unnormalised complex transform plan. Plans are created with
/// FFTW_ESTIMATE so the chosen algorithm (and therefore every rounding) is
/// the same on each run; execution on any suitably sized buffer is
/// thread-safe.
class FftPlan {
 public:
  /// `howmany` contiguous signals of length `n`, back to back.
  static FftPlan batch1d(int n, int howmany);
  /// One row-major n0 x n1 transform.
  static FftPlan rowmajor2d(int n0, int n1);

  void forward(Complex* data) const;
  void backward(Complex* data) const;

  /// Number of complex elements one execution touches.
  long extent() const { return extent_; }

 private:
  struct Plans;
  FftPlan(std::shared_ptr<const Plans> plans, long extent)
      : plans_(std::move(plans)), extent_(extent) {}

  std::shared_ptr<const Plans> plans_;
  long extent_;
};

}  // namespace qnl

#endif  // QNL_FFT_HPP
