#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbns/diagnostics.hpp"
#include "fbns/types.hpp"

namespace fbns {

enum class Scheme { semi_implicit, picard };

/// Time-stepping knobs. The viscous flux is treated implicitly, so only the
/// acoustic and transport limits enter the step-size rule.
struct StepConfig {
    double cfl = 0.5;        // in (0, 1]
    double dt_max = 1e300;   // hard cap on dt
    Scheme scheme = Scheme::semi_implicit;
    double picard_tol = 1e-12;
    int picard_max_iter = 50;
};

/// Validates StepConfig ranges; throws std::invalid_argument.
void validate_step_config(const StepConfig& cfg);

/// Per-step bookkeeping.
struct StepReport {
    double dt_used = 0.0;
    int picard_iters = 0;            // 0 for the semi-implicit scheme
    double boundary_residual = 0.0;  // |F| at x=1 with the solve's coefficients
    double linear_solve_residual = 0.0;
};

struct MomentumResult {
    std::vector<double> u;           // new face velocities
    double boundary_residual = 0.0;
    double linear_solve_residual = 0.0;
};

/// One implicit momentum solve with coefficients (rho, r) frozen at `state`:
///
///   r^{1-d} (u' - u)/dt + (rho^gamma - (2mu+rho) rho (r^{d-1} u')_x)_x = g
///
/// assembled at interior faces on the staggered grid. u'(x=0) = 0 is imposed
/// strongly; the face at x=1 carries the stress-free closure, i.e. the last
/// cell's flux satisfies (2mu+rho) rho (r^{d-1}u')_x = rho^gamma (F = 0).
/// `forcing` is an optional per-face source g used by manufactured-solution
/// tests; empty means zero. dt == 0 returns the velocities unchanged.
MomentumResult momentum_update(const LagState& state, double dt, const Params& params,
                               std::span<const double> forcing = {});

/// Spec-shaped wrapper around momentum_update returning just the velocities.
std::vector<double> momentum_update_implicit(const LagState& state, double dt,
                                             const Params& params);

/// Advances the geometry with the new velocities, r' = r + dt u', and
/// recomputes the density exactly from the Jacobian identity. The continuity
/// PDE is not integrated separately; its defect is visible to the
/// transport-residual diagnostic instead. Throws solver_error on cell
/// inversion (advising a smaller dt).
LagState continuity_and_geometry_update(const LagState& state, std::span<const double> u_new,
                                        double dt, const Params& params);

/// Step-size rule: cfl times the minimum of the per-cell acoustic limit
/// dx / (rho sqrt(gamma rho^{gamma-1})) and the per-cell transport limit
/// dx / (rho |delta(r^{d-1}u)|), capped at dt_max.
double stable_dt(const LagState& state, const StepConfig& cfg, const Params& params);

struct PicardResult {
    std::vector<double> u;
    int iterations = 0;
    std::vector<double> iterate_diffs;  // max-norm difference per iteration
    double last_linear_residual = 0.0;  // of the final inner solve
};

/// The successive-linearization stepper: repeatedly solves the linear
/// momentum system with coefficients (rho, r) taken from the previous
/// iterate's end-of-step geometry, until two successive velocity iterates
/// differ by less than picard_tol in max norm. Throws solver_error (carrying
/// the last iterate difference) if picard_max_iter is exhausted.
PicardResult picard_iterate(const LagState& state, double dt, const StepConfig& cfg,
                            const Params& params);

/// One full time step at the given dt: momentum solve (semi-implicit or
/// Picard per cfg.scheme), then geometry/density update.
std::pair<LagState, StepReport> advance(const LagState& state, double dt, const StepConfig& cfg,
                                        const Params& params);

/// One full time step with dt chosen by stable_dt.
std::pair<LagState, StepReport> step(const LagState& state, const StepConfig& cfg,
                                     const Params& params);

/// Result of a simulation: diagnostic records and states at every sample
/// time, plus full snapshots at explicitly requested times. `error` is set
/// (and the trajectory truncated) if a step failed.
struct Trajectory {
    std::vector<DiagnosticRecord> records;
    std::vector<LagState> sample_states;   // aligned with records
    std::vector<LagState> snapshots;       // at requested snapshot times
    long steps_taken = 0;
    double max_boundary_residual = 0.0;    // over every accepted step
    double max_linear_residual = 0.0;
    std::optional<std::string> error;

    bool completed() const { return !error.has_value(); }
};

/// Advances `initial` until tau >= t_end, recording a DiagnosticRecord every
/// sample_every (dt is clipped so samples land exactly on k*sample_every) and
/// snapshots at `snapshot_times`. Deterministic: identical inputs give
/// bit-identical trajectories. Step failures abort the run with the partial
/// trajectory preserved and `error` set.
Trajectory run(const LagState& initial, const StepConfig& cfg, const Params& params,
               double t_end, double sample_every,
               std::span<const double> snapshot_times = {});

}  // namespace fbns
