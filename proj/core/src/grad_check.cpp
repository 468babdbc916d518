#include "odesig/grad_check.hpp"

#include <cmath>
#include <string>

#include "odesig/errors.hpp"

namespace odesig {

double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::function<std::vector<double>(const std::vector<double>&)>& analytic,
                  const std::vector<double>& theta, double step) {
    if (step <= 0.0) throw ConfigError("grad_check: step must be positive");

    const std::vector<double> a = analytic(theta);
    if (a.size() != theta.size())
        throw ContractError("grad_check: analytic gradient has " + std::to_string(a.size()) +
                            " entries for " + std::to_string(theta.size()) + " parameters");

    double worst = 0.0;
    std::vector<double> probe = theta;
    for (size_t i = 0; i < theta.size(); ++i) {
        probe[i] = theta[i] + step;
        const double fp = f(probe);
        probe[i] = theta[i] - step;
        const double fm = f(probe);
        probe[i] = theta[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw EvaluationError("grad_check: non-finite objective at coordinate " +
                                  std::to_string(i));
        const double numeric = (fp - fm) / (2.0 * step);
        const double denom = std::max(1e-8, std::fabs(a[i]) + std::fabs(numeric));
        worst = std::max(worst, std::fabs(a[i] - numeric) / denom);
    }
    return worst;
}

} // namespace odesig
