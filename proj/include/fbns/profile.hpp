#pragma once

#include <span>
#include <vector>

#include "fbns/types.hpp"

namespace fbns {

/// Initial-data recipe: a density shape on [0, a0] plus an initial velocity.
/// The density is normalized so that the total mass int_0^{a0} rho0 r^{d-1} dr
/// equals 1, after flooring at rho_floor_frac * max(rho0).
struct ProfileSpec {
    enum class Kind { constant, parabolic, gaussian_bump, table };
    enum class VelKind { zero, linear, table };

    Kind kind = Kind::constant;
    double a0 = 1.0;

    // parabolic: rho0(r) ~ (parabolic_b - r^2); requires parabolic_b > a0^2
    double parabolic_b = 1.2;

    // gaussian_bump: rho0(r) ~ 1 + bump_amp * exp(-((r - bump_center)/bump_width)^2)
    double bump_amp = 1.0;
    double bump_center = 0.5;
    double bump_width = 0.2;

    // table: piecewise-linear density samples at strictly increasing radii
    std::vector<double> table_r;
    std::vector<double> table_rho;

    VelKind u0_kind = VelKind::zero;
    double u0_slope = 0.0;  // linear: u0(r) = u0_slope * r
    std::vector<double> u0_table_r;
    std::vector<double> u0_table_u;

    /// Regularization of the initial data, rho0 -> rho0 + epsilon with the
    /// matching velocity rescaling; defaults to off.
    double epsilon = 0.0;

    static constexpr double rho_floor_frac = 1e-8;
};

/// Inverts the mass-coordinate Jacobian dx/dr = rho r^{d-1}: returns the n+1
/// face radii r(x_f) = (d * sum_{j<f} dx/rho_j)^{1/d}, strictly increasing
/// with r(0) = 0. The per-cell Jacobian identity holds exactly by
/// construction. Throws std::invalid_argument on non-positive density.
std::vector<double> radius_from_density(std::span<const double> rho, const Params& params,
                                        const MassGrid& grid);

/// Recovers the per-cell density from face radii via the Jacobian identity
/// rho_i = dx*d/(r_{i+1}^d - r_i^d). Inverse of radius_from_density.
std::vector<double> density_from_radii(std::span<const double> r, const Params& params,
                                       const MassGrid& grid);

/// Builds the initial LagState at tau = 0: cell densities are exact mass-cell
/// means of the normalized profile, face radii come from radius_from_density,
/// and u is sampled at the faces with u(0) = 0.
LagState init_profile(const ProfileSpec& spec, const Params& params, const MassGrid& grid);

/// Eulerian cross-check of the total mass: sum_i rho_i (r_{i+1}^d - r_i^d)/d.
/// Uses only the (rho, r) fields, so it drifts from 1 if a step ever breaks
/// the geometric consistency of the state.
double eulerian_mass(const LagState& state, const Params& params);

}  // namespace fbns
