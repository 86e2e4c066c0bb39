#include "fbns/profile.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>

namespace fbns {

std::vector<double> radius_from_density(std::span<const double> rho, const Params& params,
                                        const MassGrid& grid) {
    const int n = grid.n_cells;
    if (static_cast<int>(rho.size()) != n) {
        throw std::invalid_argument("radius_from_density: density size does not match grid");
    }
    std::vector<double> r(n + 1, 0.0);
    double rd = 0.0;  // r^d at the running face
    for (int i = 0; i < n; ++i) {
        if (!(rho[i] > 0.0)) {
            throw std::invalid_argument("radius_from_density: non-positive density in cell " +
                                        std::to_string(i));
        }
        rd += params.dim * grid.dx / rho[i];
        r[i + 1] = std::pow(rd, 1.0 / params.dim);
    }
    return r;
}

std::vector<double> density_from_radii(std::span<const double> r, const Params& params,
                                       const MassGrid& grid) {
    const int n = grid.n_cells;
    if (static_cast<int>(r.size()) != n + 1) {
        throw std::invalid_argument("density_from_radii: radii size does not match grid");
    }
    std::vector<double> rho(n);
    for (int i = 0; i < n; ++i) {
        const double vol = (std::pow(r[i + 1], params.dim) - std::pow(r[i], params.dim)) / params.dim;
        if (!(vol > 0.0)) {
            throw std::invalid_argument("density_from_radii: radii not strictly increasing");
        }
        rho[i] = grid.dx / vol;
    }
    return rho;
}

double eulerian_mass(const LagState& state, const Params& params) {
    double m = 0.0;
    for (int i = 0; i < state.n_cells(); ++i) {
        m += state.rho[i] *
             (std::pow(state.r[i + 1], params.dim) - std::pow(state.r[i], params.dim)) / params.dim;
    }
    return m;
}

namespace {

// 5-point Gauss-Legendre on [a, b].
double gauss5(const std::function<double(double)>& f, double a, double b) {
    static const double xs[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                 0.5384693101056831, 0.9061798459386640};
    static const double ws[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                 0.4786286704993665, 0.2369268850561891};
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (int k = 0; k < 5; ++k) s += ws[k] * f(mid + half * xs[k]);
    return s * half;
}

double interp_table(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - xs.begin());
    const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return ys[j - 1] + t * (ys[j] - ys[j - 1]);
}

void check_table(const std::vector<double>& xs, const std::vector<double>& ys, const char* what) {
    if (xs.size() < 2 || xs.size() != ys.size()) {
        throw std::invalid_argument(std::string(what) + ": need matching r/value lists with >= 2 entries");
    }
    for (std::size_t j = 1; j < xs.size(); ++j) {
        if (!(xs[j] > xs[j - 1])) {
            throw std::invalid_argument(std::string(what) + ": radii must be strictly increasing");
        }
    }
}

// Raw (unnormalized, unfloored) density shape as a function of r.
std::function<double(double)> shape_function(const ProfileSpec& spec) {
    switch (spec.kind) {
        case ProfileSpec::Kind::constant:
            return [](double) { return 1.0; };
        case ProfileSpec::Kind::parabolic: {
            const double b = spec.parabolic_b;
            return [b](double r) { return b - r * r; };
        }
        case ProfileSpec::Kind::gaussian_bump: {
            const double amp = spec.bump_amp, c = spec.bump_center, w = spec.bump_width;
            if (!(w > 0.0)) throw std::invalid_argument("profile: bump_width must be positive");
            return [amp, c, w](double r) {
                const double z = (r - c) / w;
                return 1.0 + amp * std::exp(-z * z);
            };
        }
        case ProfileSpec::Kind::table: {
            check_table(spec.table_r, spec.table_rho, "profile table");
            const auto xs = spec.table_r;
            const auto ys = spec.table_rho;
            return [xs, ys](double r) { return interp_table(xs, ys, r); };
        }
    }
    throw std::invalid_argument("profile: unknown kind");
}

std::function<double(double)> velocity_function(const ProfileSpec& spec) {
    switch (spec.u0_kind) {
        case ProfileSpec::VelKind::zero:
            return [](double) { return 0.0; };
        case ProfileSpec::VelKind::linear: {
            const double s = spec.u0_slope;
            return [s](double r) { return s * r; };
        }
        case ProfileSpec::VelKind::table: {
            check_table(spec.u0_table_r, spec.u0_table_u, "velocity table");
            const auto xs = spec.u0_table_r;
            const auto ys = spec.u0_table_u;
            return [xs, ys](double r) { return interp_table(xs, ys, r); };
        }
    }
    throw std::invalid_argument("profile: unknown u0 kind");
}

}  // namespace

LagState init_profile(const ProfileSpec& spec, const Params& params, const MassGrid& grid) {
    if (!(spec.a0 > 0.0)) throw std::invalid_argument("profile: a0 must be positive");
    if (spec.epsilon < 0.0) throw std::invalid_argument("profile: epsilon must be non-negative");
    const int n = grid.n_cells;
    const int d = params.dim;
    LagState state;
    state.tau = 0.0;

    const auto u0 = velocity_function(spec);

    if (spec.kind == ProfileSpec::Kind::constant && spec.epsilon == 0.0) {
        // Normalization forces rho = d / a0^d; faces are exact.
        state.rho.assign(n, d / std::pow(spec.a0, d));
        state.r = radius_from_density(state.rho, params, grid);
    } else {
        const auto raw = shape_function(spec);

        // Floor the shape at rho_floor_frac * max before normalizing, so
        // boundary-vacuum data stay invertible in mass coordinates.
        const int n_fine = std::max(1 << 14, 64 * n);
        double smax = 0.0;
        for (int j = 0; j <= n_fine; ++j) {
            smax = std::max(smax, raw(spec.a0 * j / n_fine));
        }
        if (!(smax > 0.0)) {
            throw std::invalid_argument("profile: density shape is non-positive everywhere");
        }
        const double floor = ProfileSpec::rho_floor_frac * smax;
        bool floored = false;
        auto shape = [&raw, floor, &floored](double r) {
            const double v = raw(r);
            if (v < floor) {
                floored = true;
                return floor;
            }
            return v;
        };

        // Cumulative mass table on the fine grid, then c so total mass is 1.
        auto integrand_raw = [&shape, d](double r) { return shape(r) * std::pow(r, d - 1); };
        std::vector<double> node(n_fine + 1), cum(n_fine + 1, 0.0);
        for (int j = 0; j <= n_fine; ++j) node[j] = spec.a0 * j / n_fine;
        for (int j = 0; j < n_fine; ++j) {
            cum[j + 1] = cum[j] + gauss5(integrand_raw, node[j], node[j + 1]);
        }
        const double raw_mass = cum.back();
        // epsilon-regularization: rho0 -> (rho0 + eps)/N with N = 1 + eps*a0^d/d
        // applied to the already-normalized profile.
        const double c0 = 1.0 / raw_mass;
        const double eps = spec.epsilon;
        const double norm = 1.0 + eps * std::pow(spec.a0, d) / d;
        // effective normalized density: (c0*shape + eps)/norm
        auto mass_of = [&](double r) {
            // cumulative mass of the effective density up to r
            auto it = std::upper_bound(node.begin(), node.end(), r);
            int j = std::max<int>(0, static_cast<int>(it - node.begin()) - 1);
            const double base = cum[j] + gauss5(integrand_raw, node[j], r);
            return (c0 * base + eps * std::pow(r, d) / d) / norm;
        };
        auto dens_of = [&](double r) { return (c0 * shape(r) + eps) / norm; };

        // Invert mass_of at each face target by bisection + Newton polish.
        std::vector<double> faces(n + 1);
        faces[0] = 0.0;
        faces[n] = spec.a0;
        for (int f = 1; f < n; ++f) {
            const double target = static_cast<double>(f) * grid.dx;
            double lo = faces[f - 1], hi = spec.a0;
            double x = 0.5 * (lo + hi);
            for (int it = 0; it < 200; ++it) {
                const double g = mass_of(x) - target;
                if (g > 0.0) hi = x;
                else lo = x;
                const double slope = dens_of(x) * std::pow(x, d - 1);
                double xn = (slope > 0.0) ? x - g / slope : 0.5 * (lo + hi);
                if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
                if (std::abs(xn - x) < 1e-16 * spec.a0) {
                    x = xn;
                    break;
                }
                x = xn;
            }
            faces[f] = x;
        }

        state.rho = density_from_radii(faces, params, grid);
        // Rebuild the faces from the cell densities so the Jacobian identity
        // holds in exactly the cumulative-sum form used everywhere else.
        state.r = radius_from_density(state.rho, params, grid);

        if (floored) {
            std::cerr << "[fbns] note: initial density floored at " << floor
                      << " (boundary-vacuum data approximated)\n";
        }

        for (double rho_i : state.rho) {
            if (!(rho_i > 0.0)) {
                throw std::invalid_argument("profile: non-positive density after flooring");
            }
        }

        // Velocity, with the epsilon rescaling u -> rho u/(rho + eps) * N of
        // the approximation scheme (no-op at eps = 0).
        state.u.resize(n + 1);
        for (int f = 0; f <= n; ++f) {
            const double r = state.r[f];
            double v = u0(r);
            if (eps > 0.0) {
                const double rho0 = c0 * shape(r);
                v *= rho0 / (rho0 + eps) * norm;
            }
            state.u[f] = v;
        }
        state.u[0] = 0.0;
        return state;
    }

    state.u.resize(n + 1);
    for (int f = 0; f <= n; ++f) state.u[f] = u0(state.r[f]);
    state.u[0] = 0.0;
    return state;
}

}  // namespace fbns
