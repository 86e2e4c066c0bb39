#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fbns/types.hpp"

namespace fbns {

struct Trajectory;  // solver.hpp

// ---------------------------------------------------------------------------
// Quadrature helpers on the staggered state
//
// Every radial integral int_0^a f r^{d-1} dr is evaluated as sum_i f_i V_i
// with the exact cell volume V_i = (r_{i+1}^d - r_i^d)/d, the d-volume-mean
// cell radius and face-averaged cell velocity. For states satisfying the
// Jacobian identity, V_i == dx/rho_i, so these coincide with Lagrangian mass
// integrals.
// ---------------------------------------------------------------------------

/// Exact cell volumes (r_{i+1}^d - r_i^d)/d in the radial measure.
std::vector<double> cell_volumes(const LagState& state, const Params& params);

/// Cell-center radii: the d-volume midpoint ((r_i^d + r_{i+1}^d)/2)^{1/d}.
std::vector<double> cell_radii(const LagState& state, const Params& params);

/// Face-averaged velocity per cell.
std::vector<double> cell_velocities(const LagState& state);

/// div u per cell via the Lagrangian identity div u = rho (r^{d-1} u)_x.
std::vector<double> divergence_field(const LagState& state, const Params& params);

// ---------------------------------------------------------------------------
// Monitored functionals
// ---------------------------------------------------------------------------

/// Kinetic and potential energy:
/// (int 1/2 rho u^2 r^{d-1} dr, int rho^gamma/(gamma-1) r^{d-1} dr).
std::pair<double, double> energy(const LagState& state, const Params& params);

/// Instantaneous dissipation int (2mu+rho) |div u|^2 r^{d-1} dr >= 0.
double dissipation_rate(const LagState& state, const Params& params);

/// Effective viscous flux per cell: F = (2mu+rho) div u - rho^gamma.
/// The boundary value of the field (its last cell, the value extrapolated to
/// the free face) is the boundary residual.
std::vector<double> effective_viscous_flux(const LagState& state, const Params& params);

/// |F| extrapolated to the free boundary x=1 (last-cell value).
double boundary_flux_residual(const LagState& state, const Params& params);

/// theta = 2 mu ln(rho) + rho, per cell. Throws on non-positive density.
std::vector<double> theta_field(const LagState& state, const Params& params);

/// xi(r) = int_{a}^{r} rho u ds (plain radial measure), per face, integrated
/// from the outer boundary inward with the trapezoid rule; xi(a) = 0.
std::vector<double> xi_field(const LagState& state, const Params& params);

/// Per-cell residual of the transport structure
///   d/dtau (theta + xi) + int_a^r rho u^2/s ds + P(rho) = 0
/// along fixed mass coordinates, with the time derivative as the finite
/// difference between `prev` and `next` and the remaining terms averaged
/// between the two states. dt == 0 drops the time-difference term.
std::vector<double> transport_residual(const LagState& prev, const LagState& next, double dt,
                                       const Params& params);

/// H(t) = int (r-(1+t)u)^2 rho r^{d-1} dr
///        + 2(1+t)^2 int rho^gamma/(gamma-1) r^{d-1} dr, using state.tau.
double h_functional(const LagState& state, const Params& params);

/// Optional monitor: the positive part f = (theta + xi)_+ per cell.
std::vector<double> theta_xi_plus(const LagState& state, const Params& params);

/// Optional monitor: int rho f^{2 gamma} r^{d-1} dr with f = (theta + xi)_+.
double theta_xi_plus_weighted(const LagState& state, const Params& params);

struct SupVelocityCheck {
    double u_inf = 0.0;
    double div_l2 = 0.0;
    bool holds = false;
};

/// Monitors ||u||_inf <= ||div u||_L2 (radial setting, u(0)=0); `holds` is
/// true when u_inf <= div_l2 * (1 + 1e-6).
SupVelocityCheck sup_velocity_check(const LagState& state, const Params& params);

/// int rho^p r^{d-1} dr; call with p = 2 gamma + 1 for the density
/// integrability monitor. Requires p >= 1.
double lp_density_norm(const LagState& state, double p, const Params& params);

/// int rho |u|^3 r^{d-1} dr.
double rho_u_cubed(const LagState& state, const Params& params);

/// Extremes of rho(x,tau)/rho(x,0) over all cells and stored sample states
/// (a particle path is a fixed x in mass coordinates).
/// Returns (max_ratio, min_ratio).
std::pair<double, double> path_density_ratio(const Trajectory& traj);

// ---------------------------------------------------------------------------
// Growth-rate fitting vs the theoretical exponents
// ---------------------------------------------------------------------------

struct GrowthFit {
    double slope = 0.0;
    double residual = 0.0;  // RMS residual of the log-log fit
};

/// Least-squares slope of log(values) against log(1+t) over samples with
/// t >= t_min, plus the RMS fit residual. Requires >= 8 samples in the
/// window and positive values; throws std::invalid_argument otherwise.
GrowthFit fit_growth_exponent(std::span<const double> times, std::span<const double> values,
                              double t_min);

enum class RateRegime { supercritical, critical, subcritical };

/// Theoretical lower-bound exponents for the free-boundary expansion and the
/// fitted exponent measured from a run. theoretical_rate() fills the theory
/// fields; the fitted fields are populated by the rate workflow.
struct RateVerdict {
    RateRegime regime = RateRegime::supercritical;
    std::optional<double> a_exponent;  // absent in the subcritical regime
    double aM_exponent = 0.0;
    bool log_correction = false;
    double fitted_exponent = 0.0;
    double fit_residual = 0.0;
};

/// Classifies gamma against 1 + 1/d:
///   gamma > 1 + 1/d : a and a_M exponent 1/(d gamma), no log correction;
///   gamma = 1 + 1/d : exponent 1/(d gamma) with a log correction;
///   gamma < 1 + 1/d : a_M exponent (gamma-1)/gamma only.
RateVerdict theoretical_rate(const Params& params);

/// Prefix maximum a_M(t) = sup_{s<=t} a(s). Times must be non-decreasing and
/// the same length as values.
std::vector<double> running_max(std::span<const double> times, std::span<const double> values);

// ---------------------------------------------------------------------------
// Per-sample record
// ---------------------------------------------------------------------------

/// One time slice of every monitored functional. Field order matches the
/// time-series CSV columns.
struct DiagnosticRecord {
    double tau = 0.0;
    double a = 0.0;
    double mass = 0.0;
    double e_kin = 0.0;
    double e_pot = 0.0;
    double diss_rate = 0.0;
    double diss_cum = 0.0;
    double h_value = 0.0;
    double u_max = 0.0;
    double div_l2 = 0.0;
    double rho_max = 0.0;
    double rho_min = 0.0;
    double lp_rho = 0.0;   // int rho^{2 gamma + 1}
    double rho_u3 = 0.0;   // int rho |u|^3
    double f_boundary = 0.0;
};

/// Evaluates every per-state functional into a record. diss_cum and
/// f_boundary are run-level quantities supplied by the caller.
DiagnosticRecord make_record(const LagState& state, const Params& params, double diss_cum,
                             double f_boundary);

}  // namespace fbns
