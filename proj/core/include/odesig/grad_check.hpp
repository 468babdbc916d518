#pragma once

#include <functional>
#include <vector>

namespace odesig {

// Compares an analytic gradient against central finite differences of f at
// theta. Returns the worst per-coordinate relative error
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// Throws EvaluationError if f produces a non-finite value anywhere.
double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::function<std::vector<double>(const std::vector<double>&)>& analytic,
                  const std::vector<double>& theta, double step);

} // namespace odesig
