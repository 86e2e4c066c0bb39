#include "fbns/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "fbns/profile.hpp"
#include "fbns/solver.hpp"

namespace fbns {

std::vector<double> cell_volumes(const LagState& state, const Params& params) {
    const int n = state.n_cells();
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = (std::pow(state.r[i + 1], params.dim) - std::pow(state.r[i], params.dim)) / params.dim;
    }
    return v;
}

std::vector<double> cell_radii(const LagState& state, const Params& params) {
    const int n = state.n_cells();
    std::vector<double> rc(n);
    for (int i = 0; i < n; ++i) {
        rc[i] = std::pow(0.5 * (std::pow(state.r[i], params.dim) + std::pow(state.r[i + 1], params.dim)),
                         1.0 / params.dim);
    }
    return rc;
}

std::vector<double> cell_velocities(const LagState& state) {
    const int n = state.n_cells();
    std::vector<double> uc(n);
    for (int i = 0; i < n; ++i) uc[i] = 0.5 * (state.u[i] + state.u[i + 1]);
    return uc;
}

std::vector<double> divergence_field(const LagState& state, const Params& params) {
    const int n = state.n_cells();
    const double dx = state.dx();
    std::vector<double> div(n);
    for (int i = 0; i < n; ++i) {
        const double lo = std::pow(state.r[i], params.dim - 1) * state.u[i];
        const double hi = std::pow(state.r[i + 1], params.dim - 1) * state.u[i + 1];
        div[i] = state.rho[i] * (hi - lo) / dx;
    }
    return div;
}

std::pair<double, double> energy(const LagState& state, const Params& params) {
    const auto vol = cell_volumes(state, params);
    const auto uc = cell_velocities(state);
    double ek = 0.0, ep = 0.0;
    for (int i = 0; i < state.n_cells(); ++i) {
        ek += 0.5 * state.rho[i] * uc[i] * uc[i] * vol[i];
        ep += std::pow(state.rho[i], params.gamma) / (params.gamma - 1.0) * vol[i];
    }
    return {ek, ep};
}

double dissipation_rate(const LagState& state, const Params& params) {
    const auto vol = cell_volumes(state, params);
    const auto div = divergence_field(state, params);
    double s = 0.0;
    for (int i = 0; i < state.n_cells(); ++i) {
        s += (2.0 * params.mu + state.rho[i]) * div[i] * div[i] * vol[i];
    }
    return s;
}

std::vector<double> effective_viscous_flux(const LagState& state, const Params& params) {
    const auto div = divergence_field(state, params);
    std::vector<double> F(div.size());
    for (std::size_t i = 0; i < div.size(); ++i) {
        F[i] = (2.0 * params.mu + state.rho[i]) * div[i] - std::pow(state.rho[i], params.gamma);
    }
    return F;
}

double boundary_flux_residual(const LagState& state, const Params& params) {
    return std::abs(effective_viscous_flux(state, params).back());
}

std::vector<double> theta_field(const LagState& state, const Params& params) {
    std::vector<double> th(state.n_cells());
    for (int i = 0; i < state.n_cells(); ++i) {
        if (!(state.rho[i] > 0.0)) {
            throw std::invalid_argument("theta_field: non-positive density");
        }
        th[i] = 2.0 * params.mu * std::log(state.rho[i]) + state.rho[i];
    }
    return th;
}

std::vector<double> xi_field(const LagState& state, const Params& params) {
    (void)params;
    const int n = state.n_cells();
    // rho at faces by neighbor averaging (one-sided at the ends)
    std::vector<double> g(n + 1);
    g[0] = state.rho.front() * state.u[0];
    g[n] = state.rho.back() * state.u[n];
    for (int f = 1; f < n; ++f) g[f] = 0.5 * (state.rho[f - 1] + state.rho[f]) * state.u[f];
    std::vector<double> xi(n + 1, 0.0);
    for (int f = n - 1; f >= 0; --f) {
        xi[f] = xi[f + 1] - 0.5 * (g[f] + g[f + 1]) * (state.r[f + 1] - state.r[f]);
    }
    return xi;
}

namespace {

// int_a^{rc_i} rho u^2 / s ds at cell centers: trapezoid between faces
// (integrand at face 0 is the limit 0 since u(0) = 0), then face-averaged.
std::vector<double> swirl_term(const LagState& state, const Params& params) {
    (void)params;
    const int n = state.n_cells();
    std::vector<double> g(n + 1);
    g[0] = 0.0;
    for (int f = 1; f <= n; ++f) {
        const double rho_f =
            (f == n) ? state.rho[n - 1] : 0.5 * (state.rho[f - 1] + state.rho[f]);
        g[f] = rho_f * state.u[f] * state.u[f] / state.r[f];
    }
    std::vector<double> qf(n + 1, 0.0);  // at faces, qf(a) = 0
    for (int f = n - 1; f >= 0; --f) {
        qf[f] = qf[f + 1] - 0.5 * (g[f] + g[f + 1]) * (state.r[f + 1] - state.r[f]);
    }
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) q[i] = 0.5 * (qf[i] + qf[i + 1]);
    return q;
}

std::vector<double> theta_plus_xi_cells(const LagState& state, const Params& params) {
    auto th = theta_field(state, params);
    const auto xi = xi_field(state, params);
    for (std::size_t i = 0; i < th.size(); ++i) th[i] += 0.5 * (xi[i] + xi[i + 1]);
    return th;
}

}  // namespace

std::vector<double> transport_residual(const LagState& prev, const LagState& next, double dt,
                                       const Params& params) {
    if (prev.n_cells() != next.n_cells()) {
        throw std::invalid_argument("transport_residual: states have different grids");
    }
    const int n = prev.n_cells();
    const auto f0 = theta_plus_xi_cells(prev, params);
    const auto f1 = theta_plus_xi_cells(next, params);
    const auto q0 = swirl_term(prev, params);
    const auto q1 = swirl_term(next, params);
    std::vector<double> res(n);
    for (int i = 0; i < n; ++i) {
        const double dfdt = (dt > 0.0) ? (f1[i] - f0[i]) / dt : 0.0;
        const double q = 0.5 * (q0[i] + q1[i]);
        const double p = 0.5 * (std::pow(prev.rho[i], params.gamma) +
                                std::pow(next.rho[i], params.gamma));
        res[i] = dfdt + q + p;
    }
    return res;
}

double h_functional(const LagState& state, const Params& params) {
    const auto vol = cell_volumes(state, params);
    const auto rc = cell_radii(state, params);
    const auto uc = cell_velocities(state);
    const double w = 1.0 + state.tau;
    double first = 0.0, second = 0.0;
    for (int i = 0; i < state.n_cells(); ++i) {
        const double z = rc[i] - w * uc[i];
        first += state.rho[i] * z * z * vol[i];
        second += std::pow(state.rho[i], params.gamma) / (params.gamma - 1.0) * vol[i];
    }
    return first + 2.0 * w * w * second;
}

std::vector<double> theta_xi_plus(const LagState& state, const Params& params) {
    auto f = theta_plus_xi_cells(state, params);
    for (auto& v : f) v = std::max(v, 0.0);
    return f;
}

double theta_xi_plus_weighted(const LagState& state, const Params& params) {
    const auto f = theta_xi_plus(state, params);
    const auto vol = cell_volumes(state, params);
    double s = 0.0;
    for (int i = 0; i < state.n_cells(); ++i) {
        s += state.rho[i] * std::pow(f[i], 2.0 * params.gamma) * vol[i];
    }
    return s;
}

SupVelocityCheck sup_velocity_check(const LagState& state, const Params& params) {
    SupVelocityCheck out;
    for (double uf : state.u) out.u_inf = std::max(out.u_inf, std::abs(uf));
    const auto vol = cell_volumes(state, params);
    const auto div = divergence_field(state, params);
    double s = 0.0;
    for (int i = 0; i < state.n_cells(); ++i) s += div[i] * div[i] * vol[i];
    out.div_l2 = std::sqrt(s);
    out.holds = out.u_inf <= out.div_l2 * (1.0 + 1e-6);
    return out;
}

double lp_density_norm(const LagState& state, double p, const Params& params) {
    if (p < 1.0) throw std::invalid_argument("lp_density_norm: p must be >= 1");
    const auto vol = cell_volumes(state, params);
    double s = 0.0;
    for (int i = 0; i < state.n_cells(); ++i) s += std::pow(state.rho[i], p) * vol[i];
    return s;
}

double rho_u_cubed(const LagState& state, const Params& params) {
    const auto vol = cell_volumes(state, params);
    const auto uc = cell_velocities(state);
    double s = 0.0;
    for (int i = 0; i < state.n_cells(); ++i) {
        s += state.rho[i] * std::abs(uc[i]) * uc[i] * uc[i] * vol[i];
    }
    return s;
}

std::pair<double, double> path_density_ratio(const Trajectory& traj) {
    if (traj.sample_states.empty()) {
        throw std::invalid_argument("path_density_ratio: trajectory has no states");
    }
    const auto& rho0 = traj.sample_states.front().rho;
    double lo = 1.0, hi = 1.0;
    for (const auto& st : traj.sample_states) {
        for (std::size_t i = 0; i < rho0.size(); ++i) {
            const double ratio = st.rho[i] / rho0[i];
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
    }
    return {hi, lo};
}

GrowthFit fit_growth_exponent(std::span<const double> times, std::span<const double> values,
                              double t_min) {
    if (times.size() != values.size()) {
        throw std::invalid_argument("fit_growth_exponent: length mismatch");
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t_min) continue;
        if (!(values[i] > 0.0)) {
            throw std::invalid_argument("fit_growth_exponent: values must be positive");
        }
        const double x = std::log1p(times[i]);
        const double y = std::log(values[i]);
        xs.push_back(x);
        ys.push_back(y);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++m;
    }
    if (m < 8) {
        throw std::invalid_argument("fit_growth_exponent: need at least 8 samples with t >= t_min");
    }
    const double denom = m * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("fit_growth_exponent: degenerate abscissa");
    GrowthFit fit;
    fit.slope = (m * sxy - sx * sy) / denom;
    const double icpt = (sy - fit.slope * sx) / m;
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double e = ys[i] - (icpt + fit.slope * xs[i]);
        ss += e * e;
    }
    fit.residual = std::sqrt(ss / m);
    return fit;
}

RateVerdict theoretical_rate(const Params& params) {
    RateVerdict v;
    const double crit = 1.0 + 1.0 / params.dim;
    const double tol = 1e-12 * crit;
    if (params.gamma > crit + tol) {
        v.regime = RateRegime::supercritical;
        v.a_exponent = 1.0 / (params.dim * params.gamma);
        v.aM_exponent = *v.a_exponent;
        v.log_correction = false;
    } else if (std::abs(params.gamma - crit) <= tol) {
        v.regime = RateRegime::critical;
        v.a_exponent = 1.0 / (params.dim * params.gamma);
        v.aM_exponent = *v.a_exponent;
        v.log_correction = true;
    } else {
        v.regime = RateRegime::subcritical;
        v.a_exponent.reset();
        v.aM_exponent = (params.gamma - 1.0) / params.gamma;
        v.log_correction = false;
    }
    return v;
}

std::vector<double> running_max(std::span<const double> times, std::span<const double> values) {
    if (times.size() != values.size()) {
        throw std::invalid_argument("running_max: length mismatch");
    }
    std::vector<double> out(values.size());
    double cur = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0 && times[i] < times[i - 1]) {
            throw std::invalid_argument("running_max: times must be non-decreasing");
        }
        cur = std::max(cur, values[i]);
        out[i] = cur;
    }
    return out;
}

DiagnosticRecord make_record(const LagState& state, const Params& params, double diss_cum,
                             double f_boundary) {
    DiagnosticRecord rec;
    rec.tau = state.tau;
    rec.a = state.a();
    rec.mass = eulerian_mass(state, params);
    std::tie(rec.e_kin, rec.e_pot) = energy(state, params);
    rec.diss_rate = dissipation_rate(state, params);
    rec.diss_cum = diss_cum;
    rec.h_value = h_functional(state, params);
    const auto sv = sup_velocity_check(state, params);
    rec.u_max = sv.u_inf;
    rec.div_l2 = sv.div_l2;
    rec.rho_max = *std::max_element(state.rho.begin(), state.rho.end());
    rec.rho_min = *std::min_element(state.rho.begin(), state.rho.end());
    rec.lp_rho = lp_density_norm(state, 2.0 * params.gamma + 1.0, params);
    rec.rho_u3 = rho_u_cubed(state, params);
    rec.f_boundary = f_boundary;
    return rec;
}

}  // namespace fbns
