// Least-squares line fit in log-log coordinates, shared by the scaling
// diagnostics. Points with non-finite or non-positive ordinates are skipped
// so callers can feed raw sweep output.

#pragma once

#include <cstddef>
#include <vector>

namespace trimer {

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;  // max |log10 y - fit| over used points
  std::size_t points_used = 0;
};

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace trimer
