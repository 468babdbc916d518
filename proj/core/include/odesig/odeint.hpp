#pragma once

#include <string>
#include <vector>

#include "odesig/array2.hpp"
#include "odesig/errors.hpp"
#include "odesig/tape.hpp"

namespace odesig {

inline bool state_finite(const Array2& z) { return z.all_finite(); }
inline bool state_finite(const Var& z) { return z.tape->value(z).all_finite(); }

// Classic fourth-order Runge-Kutta over an autonomous field g, advanced with
// `substeps` uniform internal steps between consecutive grid points. Returns
// the state at every grid point; the state at grid[0] is z0 itself.
//
// Works for State = Array2 (plain integration) and State = Var (unrolled on a
// tape, so the whole trajectory is differentiable).
template <class State, class Field>
std::vector<State> rk4_solve(Field&& g, State z0, const std::vector<double>& grid, int substeps) {
    if (substeps < 1) throw ConfigError("rk4_solve: substeps must be >= 1");
    if (grid.empty()) throw GridError("rk4_solve: empty time grid");
    for (size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1])
            throw GridError("rk4_solve: grid not strictly increasing at index " +
                            std::to_string(i));

    std::vector<State> out;
    out.reserve(grid.size());
    out.push_back(z0);
    State z = z0;
    for (size_t i = 1; i < grid.size(); ++i) {
        const double h = (grid[i] - grid[i - 1]) / substeps;
        for (int s = 0; s < substeps; ++s) {
            State k1 = g(z);
            State k2 = g(z + (0.5 * h) * k1);
            State k3 = g(z + (0.5 * h) * k2);
            State k4 = g(z + h * k3);
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (!state_finite(z))
            throw DivergenceError("rk4_solve: non-finite state at t=" + std::to_string(grid[i]));
        out.push_back(z);
    }
    return out;
}

} // namespace odesig
