#include "trimer/fit.hpp"

#include <cmath>

namespace trimer {

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
    lx.push_back(std::log10(x[i]));
    ly.push_back(std::log10(y[i]));
  }
  LogLogFit fit;
  fit.points_used = lx.size();
  if (lx.size() < 2) return fit;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double n = static_cast<double>(lx.size());
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = std::abs(ly[i] - (fit.slope * lx[i] + fit.intercept));
    if (r > fit.max_residual) fit.max_residual = r;
  }
  return fit;
}

}  // namespace trimer
