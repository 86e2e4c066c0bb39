#include "fbns/types.hpp"

#include <cmath>
#include <sstream>

namespace fbns {

Params make_params(double gamma, double mu, int dim) {
    if (!(gamma > 1.0)) {
        throw std::invalid_argument("gamma must exceed 1");
    }
    if (!(mu > 0.0)) {
        throw std::invalid_argument("mu must be positive");
    }
    if (dim != 2 && dim != 3) {
        throw std::invalid_argument("dim must be 2 or 3");
    }
    return Params{gamma, mu, dim};
}

MassGrid MassGrid::uniform(int n_cells) {
    if (n_cells < 2) {
        throw std::invalid_argument("n_cells must be at least 2");
    }
    return MassGrid{n_cells, 1.0 / static_cast<double>(n_cells)};
}

void validate_state(const LagState& state, const Params& params, double jac_tol) {
    const int n = state.n_cells();
    if (n < 2 || state.u.size() != state.rho.size() + 1 || state.r.size() != state.u.size()) {
        throw std::invalid_argument("state: inconsistent field sizes");
    }
    if (state.r.front() != 0.0) {
        throw std::invalid_argument("state: r(0) must be 0");
    }
    const double dx = state.dx();
    for (int i = 0; i < n; ++i) {
        if (!(state.rho[i] > 0.0)) {
            throw std::invalid_argument("state: non-positive density in cell " + std::to_string(i));
        }
        if (!(state.r[i + 1] > state.r[i])) {
            throw std::invalid_argument("state: radii not strictly increasing at face " +
                                        std::to_string(i + 1));
        }
        const double vol =
            (std::pow(state.r[i + 1], params.dim) - std::pow(state.r[i], params.dim)) / params.dim;
        const double defect = std::abs(vol * state.rho[i] - dx) / dx;
        if (defect > jac_tol) {
            std::ostringstream msg;
            msg << "state: Jacobian identity violated in cell " << i << " (relative defect "
                << defect << ")";
            throw std::invalid_argument(msg.str());
        }
    }
}

}  // namespace fbns
