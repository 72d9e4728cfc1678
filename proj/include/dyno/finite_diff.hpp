#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "dyno/tensor.hpp"

namespace dyno {

struct FiniteDiffResult {
  bool pass = false;
  double max_rel_error = 0.0;
};

// Central differences, step 1e-5 per coordinate. A coordinate passes if the
// relative error is within tol, or the absolute error is within 1e-7 when the
// reference magnitude is near zero.
inline FiniteDiffResult finite_diff_check(const std::function<double(const Tensor&)>& f,
                                          const Tensor& point, const Tensor& analytic_grad,
                                          double tol, double step = 1e-5) {
  if (!point.same_shape(analytic_grad))
    throw std::invalid_argument("finite_diff_check: gradient shape mismatch");

  FiniteDiffResult res;
  res.pass = true;
  for (std::size_t i = 0; i < point.numel(); ++i) {
    Tensor hi = point, lo = point;
    hi.at(i) += step;
    lo.at(i) -= step;
    double fh = f(hi);
    double fl = f(lo);
    if (!std::isfinite(fh) || !std::isfinite(fl))
      throw std::runtime_error("finite_diff_check: non-finite evaluation");
    double numeric = (fh - fl) / (2.0 * step);
    double analytic = analytic_grad.at(i);
    double abs_err = std::abs(numeric - analytic);
    double scale = std::max(std::abs(numeric), std::abs(analytic));
    double rel = scale > 0.0 ? abs_err / scale : 0.0;
    if (abs_err <= 1e-7) rel = 0.0;  // absolute fallback near zero
    res.max_rel_error = std::max(res.max_rel_error, rel);
    if (rel > tol) res.pass = false;
  }
  return res;
}

}  // namespace dyno
