#include "fbns/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fbns/profile.hpp"

namespace fbns {

void validate_step_config(const StepConfig& cfg) {
    if (!(cfg.cfl > 0.0 && cfg.cfl <= 1.0)) {
        throw std::invalid_argument("cfl must lie in (0,1]");
    }
    if (!(cfg.picard_tol > 0.0)) {
        throw std::invalid_argument("picard_tol must be positive");
    }
    if (cfg.picard_max_iter < 1) {
        throw std::invalid_argument("picard_max_iter must be at least 1");
    }
    if (cfg.dt_max < 0.0) {
        throw std::invalid_argument("dt_max must be non-negative");
    }
}

namespace {

// Tridiagonal solve (Thomas). b is the diagonal; a/c the sub/super diagonals.
// Overwrites its scratch copies; asserts non-degenerate pivots.
std::vector<double> thomas(const std::vector<double>& a, const std::vector<double>& b,
                           const std::vector<double>& c, const std::vector<double>& rhs) {
    const std::size_t n = b.size();
    std::vector<double> cp(n), dp(n), x(n);
    double piv = b[0];
    if (piv == 0.0 || !std::isfinite(piv)) throw solver_error("momentum solve: singular pivot");
    cp[0] = c[0] / piv;
    dp[0] = rhs[0] / piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = b[i] - a[i] * cp[i - 1];
        if (piv == 0.0 || !std::isfinite(piv)) throw solver_error("momentum solve: singular pivot");
        cp[i] = c[i] / piv;
        dp[i] = (rhs[i] - a[i] * dp[i - 1]) / piv;
    }
    x[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    return x;
}

}  // namespace

MomentumResult momentum_update(const LagState& state, double dt, const Params& params,
                               std::span<const double> forcing) {
    if (dt < 0.0) throw std::invalid_argument("momentum update: dt must be non-negative");
    const int n = state.n_cells();
    if (!forcing.empty() && static_cast<int>(forcing.size()) != n + 1) {
        throw std::invalid_argument("momentum update: forcing size must match faces");
    }
    if (dt == 0.0) {
        return MomentumResult{state.u, 0.0, 0.0};
    }

    const double dx = state.dx();
    const int d = params.dim;
    const auto& rho = state.rho;
    const auto& r = state.r;

    std::vector<double> K(n), P(n), rd(n + 1);
    for (int i = 0; i < n; ++i) {
        K[i] = (2.0 * params.mu + rho[i]) * rho[i];
        P[i] = std::pow(rho[i], params.gamma);
    }
    for (int f = 0; f <= n; ++f) rd[f] = std::pow(r[f], d - 1);

    std::vector<double> lo(n + 1, 0.0), di(n + 1, 0.0), up(n + 1, 0.0), rhs(n + 1, 0.0);

    // face 0: hard constraint u = 0 (never touches 1/r at the origin)
    di[0] = 1.0;
    rhs[0] = 0.0;

    // interior faces: r^{1-d} u_tau + (P - K (r^{d-1}u)_x)_x = g, viscous part
    // implicit in u
    for (int f = 1; f < n; ++f) {
        const double rinv = std::pow(r[f], 1 - d);
        di[f] = rinv / dt + (K[f] + K[f - 1]) * rd[f] / (dx * dx);
        lo[f] = -K[f - 1] * rd[f - 1] / (dx * dx);
        up[f] = -K[f] * rd[f + 1] / (dx * dx);
        rhs[f] = rinv * state.u[f] / dt - (P[f] - P[f - 1]) / dx;
        if (!forcing.empty()) rhs[f] += forcing[f];
    }

    // free face: stress-free closure on the last cell,
    // K_{n-1} (r^{d-1}u')_x = P_{n-1}  (i.e. F = 0)
    lo[n] = -K[n - 1] * rd[n - 1] / dx;
    di[n] = K[n - 1] * rd[n] / dx;
    rhs[n] = P[n - 1];
    if (!forcing.empty()) rhs[n] += forcing[n];

    MomentumResult res;
    res.u = thomas(lo, di, up, rhs);
    res.u[0] = 0.0;

    // residuals of the solved system and of the stress-free row
    double lin = 0.0;
    for (int f = 0; f <= n; ++f) {
        double ax = di[f] * res.u[f];
        if (f > 0) ax += lo[f] * res.u[f - 1];
        if (f < n) ax += up[f] * res.u[f + 1];
        lin = std::max(lin, std::abs(ax - rhs[f]));
    }
    res.linear_solve_residual = lin;
    res.boundary_residual =
        std::abs(P[n - 1] - K[n - 1] * (rd[n] * res.u[n] - rd[n - 1] * res.u[n - 1]) / dx);
    return res;
}

std::vector<double> momentum_update_implicit(const LagState& state, double dt,
                                             const Params& params) {
    return momentum_update(state, dt, params).u;
}

LagState continuity_and_geometry_update(const LagState& state, std::span<const double> u_new,
                                        double dt, const Params& params) {
    const int n = state.n_cells();
    if (static_cast<int>(u_new.size()) != n + 1) {
        throw std::invalid_argument("geometry update: velocity size must match faces");
    }
    if (!u_new.empty() && u_new[0] != 0.0) {
        throw std::invalid_argument("geometry update: u(0) must be 0");
    }
    if (dt == 0.0) {
        LagState next = state;  // exact identity, no rho recomputation
        next.u.assign(u_new.begin(), u_new.end());
        return next;
    }
    LagState next;
    next.tau = state.tau + dt;
    next.u.assign(u_new.begin(), u_new.end());
    next.r.resize(n + 1);
    for (int f = 0; f <= n; ++f) next.r[f] = state.r[f] + dt * u_new[f];
    next.rho.resize(n);
    const double dx = state.dx();
    for (int i = 0; i < n; ++i) {
        const double vol =
            (std::pow(next.r[i + 1], params.dim) - std::pow(next.r[i], params.dim)) / params.dim;
        if (!(next.r[i + 1] > next.r[i]) || !(vol > 0.0)) {
            std::ostringstream msg;
            msg << "cell inversion at cell " << i << " (tau=" << state.tau << ", dt=" << dt
                << "): reduce the time step";
            throw solver_error(msg.str());
        }
        next.rho[i] = dx / vol;
    }
    return next;
}

double stable_dt(const LagState& state, const StepConfig& cfg, const Params& params) {
    const int n = state.n_cells();
    const double dx = state.dx();
    const int d = params.dim;
    double dt = std::numeric_limits<double>::infinity();
    double rdu_prev = std::pow(state.r[0], d - 1) * state.u[0];  // 0 at the origin face
    for (int i = 0; i < n; ++i) {
        const double rho = state.rho[i];
        const double acoustic = dx / (rho * std::sqrt(params.gamma * std::pow(rho, params.gamma - 1.0)));
        dt = std::min(dt, acoustic);
        const double rdu = std::pow(state.r[i + 1], d - 1) * state.u[i + 1];
        const double var = std::abs(rdu - rdu_prev);
        if (var > 0.0) {
            dt = std::min(dt, dx / (rho * var));
        }
        rdu_prev = rdu;
    }
    return std::min(cfg.cfl * dt, cfg.dt_max);
}

PicardResult picard_iterate(const LagState& state, double dt, const StepConfig& cfg,
                            const Params& params) {
    if (dt < 0.0) throw std::invalid_argument("picard: dt must be non-negative");
    PicardResult out;
    if (dt == 0.0) {
        out.u = state.u;
        out.iterations = 1;
        return out;
    }
    LagState coeffs = state;  // iterate-k coefficients (rho, r); u_tau is always from `state`
    std::vector<double> u_prev;
    for (int k = 1; k <= cfg.picard_max_iter; ++k) {
        LagState sys = coeffs;
        sys.u = state.u;  // time derivative anchored at the step's start
        auto res = momentum_update(sys, dt, params);
        if (!u_prev.empty()) {
            double diff = 0.0;
            for (std::size_t f = 0; f < res.u.size(); ++f) {
                diff = std::max(diff, std::abs(res.u[f] - u_prev[f]));
            }
            out.iterate_diffs.push_back(diff);
            if (diff < cfg.picard_tol) {
                out.u = std::move(res.u);
                out.iterations = k;
                out.last_linear_residual = res.linear_solve_residual;
                return out;
            }
        }
        u_prev = res.u;
        coeffs = continuity_and_geometry_update(state, res.u, dt, params);
    }
    std::ostringstream msg;
    msg << "picard iteration did not converge within " << cfg.picard_max_iter
        << " iterations (last difference "
        << (out.iterate_diffs.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : out.iterate_diffs.back())
        << "); dt=" << dt << " is likely too large for contraction";
    throw solver_error(msg.str());
}

std::pair<LagState, StepReport> advance(const LagState& state, double dt, const StepConfig& cfg,
                                        const Params& params) {
    StepReport rep;
    rep.dt_used = dt;
    if (cfg.scheme == Scheme::picard && dt > 0.0) {
        auto pic = picard_iterate(state, dt, cfg, params);
        rep.picard_iters = pic.iterations;
        rep.linear_solve_residual = pic.last_linear_residual;
        LagState next = continuity_and_geometry_update(state, pic.u, dt, params);
        // the converged coefficients are the end-of-step geometry, so the
        // stress-free residual of the accepted velocities is F on `next`
        rep.boundary_residual = boundary_flux_residual(next, params);
        return {std::move(next), rep};
    }
    auto res = momentum_update(state, dt, params);
    rep.boundary_residual = res.boundary_residual;
    rep.linear_solve_residual = res.linear_solve_residual;
    LagState next = continuity_and_geometry_update(state, res.u, dt, params);
    return {std::move(next), rep};
}

std::pair<LagState, StepReport> step(const LagState& state, const StepConfig& cfg,
                                     const Params& params) {
    validate_step_config(cfg);
    const double dt = stable_dt(state, cfg, params);
    return advance(state, dt, cfg, params);
}

namespace {

// Event grid for the run loop: all sample times k*sample_every up to t_end,
// plus requested snapshot times and t_end itself.
struct Events {
    std::vector<double> times;  // sorted, unique, > 0
    std::vector<bool> is_sample;
    std::vector<bool> is_snapshot;
};

Events build_events(double t_end, double sample_every, std::span<const double> snaps) {
    Events ev;
    std::vector<std::pair<double, int>> marks;  // time, kind bit (1 sample, 2 snapshot)
    const long n_samples = static_cast<long>(std::floor(t_end / sample_every + 1e-9));
    for (long k = 1; k <= n_samples; ++k) {
        marks.emplace_back(std::min(k * sample_every, t_end), 1);
    }
    if (marks.empty() || marks.back().first < t_end) {
        marks.emplace_back(t_end, 0);
    }
    for (double s : snaps) {
        if (s > 0.0 && s <= t_end) marks.emplace_back(s, 2);
    }
    std::sort(marks.begin(), marks.end());
    for (auto& [t, kind] : marks) {
        const double rel = std::max(1.0, std::abs(t));
        if (!ev.times.empty() && t - ev.times.back() < 1e-12 * rel) {
            ev.is_sample.back() = ev.is_sample.back() || (kind & 1);
            ev.is_snapshot.back() = ev.is_snapshot.back() || (kind & 2);
        } else {
            ev.times.push_back(t);
            ev.is_sample.push_back(kind & 1);
            ev.is_snapshot.push_back(kind & 2);
        }
    }
    return ev;
}

}  // namespace

Trajectory run(const LagState& initial, const StepConfig& cfg, const Params& params, double t_end,
               double sample_every, std::span<const double> snapshot_times) {
    validate_step_config(cfg);
    if (t_end < 0.0) throw std::invalid_argument("run: t_end must be non-negative");
    if (!(sample_every > 0.0)) throw std::invalid_argument("run: sample_every must be positive");

    Trajectory traj;
    double diss_cum = 0.0;
    double diss_prev = dissipation_rate(initial, params);

    // Initial record; f_boundary carries the raw boundary flux of the data
    // (compatibility at t=0 is recorded, not enforced).
    traj.records.push_back(
        make_record(initial, params, 0.0, boundary_flux_residual(initial, params)));
    traj.sample_states.push_back(initial);

    if (t_end == 0.0) return traj;

    const Events ev = build_events(t_end, sample_every, snapshot_times);
    LagState state = initial;
    double last_bres = traj.records.front().f_boundary;

    std::size_t next_ev = 0;
    while (next_ev < ev.times.size()) {
        const double target = ev.times[next_ev];
        double dt = stable_dt(state, cfg, params);
        bool hit = false;
        if (state.tau + dt >= target - 1e-12 * std::max(1.0, target)) {
            dt = target - state.tau;
            hit = true;
        }
        if (!(state.tau + dt > state.tau) && !hit) {
            traj.error = "time step underflow (dt_max too small for t_end?)";
            return traj;
        }
        try {
            auto [next, rep] = advance(state, dt, cfg, params);
            state = std::move(next);
            last_bres = rep.boundary_residual;
            traj.max_boundary_residual = std::max(traj.max_boundary_residual, rep.boundary_residual);
            traj.max_linear_residual = std::max(traj.max_linear_residual, rep.linear_solve_residual);
        } catch (const solver_error& err) {
            traj.error = err.what();
            return traj;
        }
        ++traj.steps_taken;
        const double dnew = dissipation_rate(state, params);
        diss_cum += 0.5 * dt * (diss_prev + dnew);
        diss_prev = dnew;
        if (hit) {
            state.tau = target;  // land exactly on the event time
            if (ev.is_sample[next_ev]) {
                traj.records.push_back(make_record(state, params, diss_cum, last_bres));
                traj.sample_states.push_back(state);
            }
            if (ev.is_snapshot[next_ev]) {
                traj.snapshots.push_back(state);
            }
            ++next_ev;
        }
    }
    return traj;
}

}  // namespace fbns
