#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fbns/profile.hpp"
#include "fbns/solver.hpp"
#include "fbns/types.hpp"

namespace fbns {

/// Everything needed to reproduce one simulation.
struct RunConfig {
    Params params;
    ProfileSpec profile;
    StepConfig step;
    int n_cells = 256;
    double t_end = 0.0;
    double sample_every = 0.1;
    std::vector<double> snapshot_times;
    std::string output_dir = "out";
    unsigned seed = 0;  // synthetic-noise tests only
};

/// Parses the flat key=value config text ('#' starts a comment, lists are
/// comma-separated). Applies defaults (scheme=semi_implicit, cfl=0.5,
/// sample_every=0.1, ...). Throws config_error listing unknown keys, or with
/// a field-specific message for invalid values.
RunConfig parse_config(const std::string& text);

/// Loads and parses a config file.
RunConfig load_config(const std::filesystem::path& path);

/// Emits the full key=value document; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& cfg);

/// Builds the initial state from the config.
LagState initial_state(const RunConfig& cfg);

/// Executes the configured simulation.
Trajectory run_config(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// CSV column header of the time series (bit-exact contract).
extern const char* const kTimeseriesHeader;

/// Writes timeseries.csv (one row per record, >= 17 significant digits) and
/// snapshot_t<tau>.csv files (header x,r,rho,u; one row per cell) for the
/// trajectory's snapshots plus the first and last sample states. I/O errors
/// carry the offending path.
void write_timeseries(const Trajectory& traj, const std::filesystem::path& dir);

void write_records(std::span<const DiagnosticRecord> records, std::ostream& os);
void write_snapshot(const LagState& state, std::ostream& os);

std::vector<DiagnosticRecord> read_records(const std::filesystem::path& csv);

/// Cell rows of a persisted snapshot.
struct SnapshotData {
    double tau = 0.0;
    std::vector<double> x, r, rho, u;
};
SnapshotData read_snapshot(const std::filesystem::path& csv);

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

struct ConvergenceQuantity {
    std::string name;
    std::vector<double> values;     // per level (coarse -> fine); error norms for profiles
    std::vector<double> diffs;      // |q_l - q_{l+1}|
    std::optional<double> order;    // log2(d1/d2); empty if indeterminate
    std::string status;             // "ok", "exact", or "indeterminate"
};

struct ConvergenceStudy {
    std::vector<int> levels;  // n_cells per level
    std::vector<ConvergenceQuantity> quantities;
};

/// Runs cfg at n_cells x {1,2,4,...} (levels >= 3) and reports the observed
/// Richardson order for final-time a, total energy, and the density profile.
/// The study samples each level only at t_end so the dt sequences scale
/// cleanly with resolution. Differences at machine epsilon are flagged
/// "exact"; a non-monotone difference sequence is flagged "indeterminate"
/// rather than raising.
ConvergenceStudy convergence_study(const RunConfig& cfg, int levels);

// ---------------------------------------------------------------------------
// Invariant report
// ---------------------------------------------------------------------------

struct InvariantCheck {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct InvariantReport {
    std::vector<InvariantCheck> checks;
    bool all_pass = false;
};

/// Evaluates every run-level check (mass drift, energy budget, sup-velocity
/// monitor, positivity, path ratios, boundary-flux residual, growth
/// exponents vs theory) against the trajectory's records. Pure function of
/// its inputs.
InvariantReport invariant_report(const Trajectory& traj, const Params& params);

}  // namespace fbns
