#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fbns {

/// Configuration / input errors (bad config text, bad field values).
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Runtime solver failures (cell inversion, Picard non-convergence, ...).
class solver_error : public std::runtime_error {
public:
    explicit solver_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Physical constants of the model: pressure law P(rho) = rho^gamma,
/// constant shear viscosity mu, density-proportional bulk viscosity,
/// spatial dimension d in {2,3}.
struct Params {
    double gamma = 2.0;
    double mu = 1.0;
    int dim = 2;
};

/// Validates and constructs Params. Throws std::invalid_argument naming the
/// offending field.
Params make_params(double gamma, double mu, int dim);

/// Uniform grid in the Lagrangian mass coordinate x over [0,1].
/// Cell centers sit at (i+1/2)*dx, faces at i*dx; total mass is 1 by
/// construction of the coordinate.
struct MassGrid {
    int n_cells = 0;
    double dx = 0.0;

    static MassGrid uniform(int n_cells);
};

/// Discrete state on the fixed mass grid at time tau.
///
/// Staggering: rho lives on the n cells, u and r live on the n+1 faces.
/// Invariants: r strictly increasing with r[0] == 0, rho > 0, and the
/// Jacobian identity (r_{i+1}^d - r_i^d)/d == dx/rho_i per cell.
struct LagState {
    std::vector<double> rho;  // per cell
    std::vector<double> u;    // per face
    std::vector<double> r;    // per face
    double tau = 0.0;

    int n_cells() const { return static_cast<int>(rho.size()); }
    double dx() const { return 1.0 / static_cast<double>(rho.size()); }
    /// Outer (free-boundary) radius a = r(x=1).
    double a() const { return r.back(); }
};

/// Checks the LagState invariants; throws std::invalid_argument on the first
/// violation. `jac_tol` bounds the relative defect of the Jacobian identity.
void validate_state(const LagState& state, const Params& params, double jac_tol = 1e-10);

}  // namespace fbns
