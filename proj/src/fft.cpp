#include "qnl/fft.hpp"

#include <mutex>
#include <vector>

#include <fftw3.h>

namespace qnl {
namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

struct FftPlan::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
};

FftPlan FftPlan::batch1d(int n, int howmany) {
  if (n < 1 || howmany < 1) throw ValidationError("invalid FFT batch shape");
  const long extent = long(n) * howmany;
  std::vector<Complex> scratch(extent);
  auto plans = std::make_shared<Plans>();
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard lock(planner_mutex());
  int dims[1] = {n};
  plans->fwd = fftw_plan_many_dft(1, dims, howmany, as_fftw(scratch.data()),
                                  nullptr, 1, n, as_fftw(scratch.data()),
                                  nullptr, 1, n, FFTW_FORWARD, flags);
  plans->bwd = fftw_plan_many_dft(1, dims, howmany, as_fftw(scratch.data()),
                                  nullptr, 1, n, as_fftw(scratch.data()),
                                  nullptr, 1, n, FFTW_BACKWARD, flags);
  if (!plans->fwd || !plans->bwd) throw NumericalError("FFTW planning failed");
  return FftPlan(std::move(plans), extent);
}

FftPlan FftPlan::rowmajor2d(int n0, int n1) {
  if (n0 < 1 || n1 < 1) throw ValidationError("invalid FFT 2D shape");
  const long extent = long(n0) * n1;
  std::vector<Complex> scratch(extent);
  auto plans = std::make_shared<Plans>();
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard lock(planner_mutex());
  plans->fwd = fftw_plan_dft_2d(n0, n1, as_fftw(scratch.data()),
                                as_fftw(scratch.data()), FFTW_FORWARD, flags);
  plans->bwd = fftw_plan_dft_2d(n0, n1, as_fftw(scratch.data()),
                                as_fftw(scratch.data()), FFTW_BACKWARD, flags);
  if (!plans->fwd || !plans->bwd) throw NumericalError("FFTW planning failed");
  return FftPlan(std::move(plans), extent);
}

void FftPlan::forward(Complex* data) const {
  fftw_execute_dft(plans_->fwd, as_fftw(data), as_fftw(data));
}

void FftPlan::backward(Complex* data) const {
  fftw_execute_dft(plans_->bwd, as_fftw(data), as_fftw(data));
}

}  // namespace qnl
