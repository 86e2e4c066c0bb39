#include "fbns/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace fbns {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    const char* p = v.c_str();
    char* end = nullptr;
    const double x = std::strtod(p, &end);
    if (end == p || *end != '\0') {
        throw config_error(key + ": expected a number, got '" + v + "'");
    }
    return x;
}

int to_int(const std::string& key, const std::string& v) {
    const double x = to_double(key, v);
    if (x != std::floor(x) || std::abs(x) > 1e9) {
        throw config_error(key + ": expected an integer, got '" + v + "'");
    }
    return static_cast<int>(x);
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(to_double(key, item));
    }
    return out;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string fmt_list(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ",";
        s += fmt(xs[i]);
    }
    return s;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error("line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw config_error("line " + std::to_string(lineno) + ": empty key");
        }
        if (kv.count(key)) {
            throw config_error("duplicate key '" + key + "'");
        }
        kv[key] = val;
    }

    RunConfig cfg;
    auto take = [&kv](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto need = [&take](const char* key) -> std::string {
        auto v = take(key);
        if (!v) throw config_error(std::string("missing required key '") + key + "'");
        return *v;
    };

    const double gamma = to_double("gamma", need("gamma"));
    const double mu = to_double("mu", need("mu"));
    const int dim = to_int("dim", need("dim"));
    try {
        cfg.params = make_params(gamma, mu, dim);
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
    cfg.t_end = to_double("t_end", need("t_end"));
    if (cfg.t_end < 0.0) throw config_error("t_end must be non-negative");

    if (auto v = take("profile")) {
        if (*v == "constant") cfg.profile.kind = ProfileSpec::Kind::constant;
        else if (*v == "parabolic") cfg.profile.kind = ProfileSpec::Kind::parabolic;
        else if (*v == "gaussian_bump" || *v == "gaussian-bump")
            cfg.profile.kind = ProfileSpec::Kind::gaussian_bump;
        else if (*v == "table") cfg.profile.kind = ProfileSpec::Kind::table;
        else throw config_error("profile: unknown kind '" + *v + "'");
    }
    if (auto v = take("a0")) cfg.profile.a0 = to_double("a0", *v);
    if (!(cfg.profile.a0 > 0.0)) throw config_error("a0 must be positive");
    if (auto v = take("parabolic_b")) cfg.profile.parabolic_b = to_double("parabolic_b", *v);
    if (auto v = take("bump_amp")) cfg.profile.bump_amp = to_double("bump_amp", *v);
    if (auto v = take("bump_center")) cfg.profile.bump_center = to_double("bump_center", *v);
    if (auto v = take("bump_width")) cfg.profile.bump_width = to_double("bump_width", *v);
    if (auto v = take("table_r")) cfg.profile.table_r = to_list("table_r", *v);
    if (auto v = take("table_rho")) cfg.profile.table_rho = to_list("table_rho", *v);
    if (auto v = take("u0_kind")) {
        if (*v == "zero") cfg.profile.u0_kind = ProfileSpec::VelKind::zero;
        else if (*v == "linear") cfg.profile.u0_kind = ProfileSpec::VelKind::linear;
        else if (*v == "table") cfg.profile.u0_kind = ProfileSpec::VelKind::table;
        else throw config_error("u0_kind: unknown kind '" + *v + "'");
    }
    if (auto v = take("u0_slope")) cfg.profile.u0_slope = to_double("u0_slope", *v);
    if (auto v = take("u0_table_r")) cfg.profile.u0_table_r = to_list("u0_table_r", *v);
    if (auto v = take("u0_table_u")) cfg.profile.u0_table_u = to_list("u0_table_u", *v);
    if (auto v = take("epsilon")) cfg.profile.epsilon = to_double("epsilon", *v);
    if (cfg.profile.epsilon < 0.0) throw config_error("epsilon must be non-negative");

    if (auto v = take("scheme")) {
        if (*v == "semi_implicit") cfg.step.scheme = Scheme::semi_implicit;
        else if (*v == "picard") cfg.step.scheme = Scheme::picard;
        else throw config_error("scheme: unknown value '" + *v + "'");
    }
    if (auto v = take("cfl")) cfg.step.cfl = to_double("cfl", *v);
    if (auto v = take("dt_max")) cfg.step.dt_max = to_double("dt_max", *v);
    if (auto v = take("picard_tol")) cfg.step.picard_tol = to_double("picard_tol", *v);
    if (auto v = take("picard_max_iter")) cfg.step.picard_max_iter = to_int("picard_max_iter", *v);
    try {
        validate_step_config(cfg.step);
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }

    if (auto v = take("n_cells")) cfg.n_cells = to_int("n_cells", *v);
    if (cfg.n_cells < 8) throw config_error("n_cells must be at least 8");
    if (auto v = take("sample_every")) cfg.sample_every = to_double("sample_every", *v);
    if (!(cfg.sample_every > 0.0)) throw config_error("sample_every must be positive");
    if (auto v = take("snapshot_times")) cfg.snapshot_times = to_list("snapshot_times", *v);
    if (auto v = take("output_dir")) cfg.output_dir = *v;
    if (auto v = take("seed")) cfg.seed = static_cast<unsigned>(to_int("seed", *v));

    if (!kv.empty()) {
        std::string keys;
        for (const auto& [k, _] : kv) {
            if (!keys.empty()) keys += ", ";
            keys += k;
        }
        throw config_error("unknown config keys: " + keys);
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "gamma = " << fmt(cfg.params.gamma) << "\n";
    os << "mu = " << fmt(cfg.params.mu) << "\n";
    os << "dim = " << cfg.params.dim << "\n";
    const char* kind = "constant";
    switch (cfg.profile.kind) {
        case ProfileSpec::Kind::constant: kind = "constant"; break;
        case ProfileSpec::Kind::parabolic: kind = "parabolic"; break;
        case ProfileSpec::Kind::gaussian_bump: kind = "gaussian_bump"; break;
        case ProfileSpec::Kind::table: kind = "table"; break;
    }
    os << "profile = " << kind << "\n";
    os << "a0 = " << fmt(cfg.profile.a0) << "\n";
    os << "parabolic_b = " << fmt(cfg.profile.parabolic_b) << "\n";
    os << "bump_amp = " << fmt(cfg.profile.bump_amp) << "\n";
    os << "bump_center = " << fmt(cfg.profile.bump_center) << "\n";
    os << "bump_width = " << fmt(cfg.profile.bump_width) << "\n";
    if (!cfg.profile.table_r.empty()) os << "table_r = " << fmt_list(cfg.profile.table_r) << "\n";
    if (!cfg.profile.table_rho.empty())
        os << "table_rho = " << fmt_list(cfg.profile.table_rho) << "\n";
    const char* uk = "zero";
    switch (cfg.profile.u0_kind) {
        case ProfileSpec::VelKind::zero: uk = "zero"; break;
        case ProfileSpec::VelKind::linear: uk = "linear"; break;
        case ProfileSpec::VelKind::table: uk = "table"; break;
    }
    os << "u0_kind = " << uk << "\n";
    os << "u0_slope = " << fmt(cfg.profile.u0_slope) << "\n";
    if (!cfg.profile.u0_table_r.empty())
        os << "u0_table_r = " << fmt_list(cfg.profile.u0_table_r) << "\n";
    if (!cfg.profile.u0_table_u.empty())
        os << "u0_table_u = " << fmt_list(cfg.profile.u0_table_u) << "\n";
    os << "epsilon = " << fmt(cfg.profile.epsilon) << "\n";
    os << "scheme = " << (cfg.step.scheme == Scheme::picard ? "picard" : "semi_implicit") << "\n";
    os << "cfl = " << fmt(cfg.step.cfl) << "\n";
    os << "dt_max = " << fmt(cfg.step.dt_max) << "\n";
    os << "picard_tol = " << fmt(cfg.step.picard_tol) << "\n";
    os << "picard_max_iter = " << cfg.step.picard_max_iter << "\n";
    os << "n_cells = " << cfg.n_cells << "\n";
    os << "t_end = " << fmt(cfg.t_end) << "\n";
    os << "sample_every = " << fmt(cfg.sample_every) << "\n";
    if (!cfg.snapshot_times.empty())
        os << "snapshot_times = " << fmt_list(cfg.snapshot_times) << "\n";
    os << "output_dir = " << cfg.output_dir << "\n";
    os << "seed = " << cfg.seed << "\n";
    return os.str();
}

LagState initial_state(const RunConfig& cfg) {
    return init_profile(cfg.profile, cfg.params, MassGrid::uniform(cfg.n_cells));
}

Trajectory run_config(const RunConfig& cfg) {
    const LagState init = initial_state(cfg);
    return run(init, cfg.step, cfg.params, cfg.t_end, cfg.sample_every, cfg.snapshot_times);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

const char* const kTimeseriesHeader =
    "tau,a,mass,e_kin,e_pot,diss_rate,diss_cum,h_value,u_max,div_l2,rho_max,rho_min,lp_rho,"
    "rho_u3,f_boundary";

void write_records(std::span<const DiagnosticRecord> records, std::ostream& os) {
    os << kTimeseriesHeader << "\n";
    for (const auto& r : records) {
        os << fmt(r.tau) << ',' << fmt(r.a) << ',' << fmt(r.mass) << ',' << fmt(r.e_kin) << ','
           << fmt(r.e_pot) << ',' << fmt(r.diss_rate) << ',' << fmt(r.diss_cum) << ','
           << fmt(r.h_value) << ',' << fmt(r.u_max) << ',' << fmt(r.div_l2) << ','
           << fmt(r.rho_max) << ',' << fmt(r.rho_min) << ',' << fmt(r.lp_rho) << ','
           << fmt(r.rho_u3) << ',' << fmt(r.f_boundary) << "\n";
    }
}

void write_snapshot(const LagState& state, std::ostream& os) {
    os << "x,r,rho,u\n";
    const double dx = state.dx();
    for (int i = 0; i < state.n_cells(); ++i) {
        os << fmt((i + 0.5) * dx) << ',' << fmt(0.5 * (state.r[i] + state.r[i + 1])) << ','
           << fmt(state.rho[i]) << ',' << fmt(0.5 * (state.u[i] + state.u[i + 1])) << "\n";
    }
}

namespace {

std::string snapshot_name(double tau) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "snapshot_t%.6g.csv", tau);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fn) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    fn(out);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void write_timeseries(const Trajectory& traj, const std::filesystem::path& dir) {
    if (traj.records.empty()) throw std::invalid_argument("write_timeseries: empty trajectory");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + dir.string());

    write_file(dir / "timeseries.csv",
               [&](std::ostream& os) { write_records(traj.records, os); });

    // Snapshots: requested times plus the first and last sample states so a
    // report can always rebuild the path-ratio baseline.
    std::vector<const LagState*> snaps;
    if (!traj.sample_states.empty()) {
        snaps.push_back(&traj.sample_states.front());
        if (traj.sample_states.size() > 1) snaps.push_back(&traj.sample_states.back());
    }
    for (const auto& s : traj.snapshots) snaps.push_back(&s);
    std::vector<std::string> written;
    for (const LagState* s : snaps) {
        const std::string name = snapshot_name(s->tau);
        if (std::find(written.begin(), written.end(), name) != written.end()) continue;
        written.push_back(name);
        write_file(dir / name, [&](std::ostream& os) { write_snapshot(*s, os); });
    }
}

std::vector<DiagnosticRecord> read_records(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw std::runtime_error("cannot open: " + csv.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != kTimeseriesHeader) {
        throw std::runtime_error("bad time-series header in " + csv.string());
    }
    std::vector<DiagnosticRecord> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::array<double, 15> v{};
        std::stringstream ss(line);
        std::string item;
        std::size_t k = 0;
        while (std::getline(ss, item, ',') && k < v.size()) {
            v[k++] = to_double("csv field", trim(item));
        }
        if (k != v.size()) {
            throw std::runtime_error(csv.string() + ":" + std::to_string(lineno) +
                                     ": expected 15 fields");
        }
        DiagnosticRecord r;
        r.tau = v[0]; r.a = v[1]; r.mass = v[2]; r.e_kin = v[3]; r.e_pot = v[4];
        r.diss_rate = v[5]; r.diss_cum = v[6]; r.h_value = v[7]; r.u_max = v[8];
        r.div_l2 = v[9]; r.rho_max = v[10]; r.rho_min = v[11]; r.lp_rho = v[12];
        r.rho_u3 = v[13]; r.f_boundary = v[14];
        out.push_back(r);
    }
    return out;
}

SnapshotData read_snapshot(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw std::runtime_error("cannot open: " + csv.string());
    SnapshotData snap;
    const std::string name = csv.filename().string();
    if (name.rfind("snapshot_t", 0) == 0) {
        snap.tau = std::strtod(name.c_str() + std::strlen("snapshot_t"), nullptr);
    }
    std::string line;
    if (!std::getline(in, line) || trim(line) != "x,r,rho,u") {
        throw std::runtime_error("bad snapshot header in " + csv.string());
    }
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string item;
        double v[4];
        for (double& f : v) {
            if (!std::getline(ss, item, ',')) {
                throw std::runtime_error("short snapshot row in " + csv.string());
            }
            f = to_double("snapshot field", trim(item));
        }
        snap.x.push_back(v[0]);
        snap.r.push_back(v[1]);
        snap.rho.push_back(v[2]);
        snap.u.push_back(v[3]);
    }
    return snap;
}

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

ConvergenceStudy convergence_study(const RunConfig& cfg, int levels) {
    if (levels < 3) throw std::invalid_argument("convergence_study: levels must be at least 3");
    ConvergenceStudy study;
    std::vector<double> a_vals, e_vals;
    std::vector<std::vector<double>> profiles;
    for (int l = 0; l < levels; ++l) {
        RunConfig c = cfg;
        c.n_cells = cfg.n_cells << l;
        // one sampling interval: the study only compares final-time values,
        // and mid-run sample clipping perturbs the dt sequence unevenly
        // across levels
        c.sample_every = (cfg.t_end > 0.0) ? cfg.t_end : 1.0;
        c.snapshot_times.clear();
        const Trajectory traj = run_config(c);
        if (traj.error) {
            throw solver_error("convergence level n=" + std::to_string(c.n_cells) +
                               " failed: " + *traj.error);
        }
        study.levels.push_back(c.n_cells);
        const auto& rec = traj.records.back();
        a_vals.push_back(rec.a);
        e_vals.push_back(rec.e_kin + rec.e_pot);
        profiles.push_back(traj.sample_states.back().rho);
    }

    auto scalar_quantity = [&](const std::string& name, const std::vector<double>& vals) {
        ConvergenceQuantity q;
        q.name = name;
        q.values = vals;
        for (int l = 0; l + 1 < levels; ++l) q.diffs.push_back(std::abs(vals[l] - vals[l + 1]));
        double scale = 1e-30;
        for (double v : vals) scale = std::max(scale, std::abs(v));
        const double d1 = q.diffs[q.diffs.size() - 2];
        const double d2 = q.diffs[q.diffs.size() - 1];
        if (d1 <= 1e-12 * scale && d2 <= 1e-12 * scale) {
            q.status = "exact";
        } else if (d2 <= 0.0 || d2 >= d1) {
            q.status = "indeterminate";
        } else {
            q.order = std::log2(d1 / d2);
            q.status = "ok";
        }
        return q;
    };
    study.quantities.push_back(scalar_quantity("a_final", a_vals));
    study.quantities.push_back(scalar_quantity("energy_final", e_vals));

    // rho profile: coarsen each finer level pairwise (harmonic mean is the
    // exact mass coarsening) and take the max-norm difference
    ConvergenceQuantity q;
    q.name = "rho_profile";
    double scale = 1e-30;
    for (int l = 0; l + 1 < levels; ++l) {
        const auto& coarse = profiles[l];
        const auto& fine = profiles[l + 1];
        double diff = 0.0;
        for (std::size_t i = 0; i < coarse.size(); ++i) {
            const double h = 2.0 / (1.0 / fine[2 * i] + 1.0 / fine[2 * i + 1]);
            diff = std::max(diff, std::abs(coarse[i] - h));
            scale = std::max(scale, std::abs(coarse[i]));
        }
        q.diffs.push_back(diff);
        q.values.push_back(diff);
    }
    const double d1 = q.diffs[q.diffs.size() - 2];
    const double d2 = q.diffs[q.diffs.size() - 1];
    if (d1 <= 1e-12 * scale && d2 <= 1e-12 * scale) {
        q.status = "exact";
    } else if (d2 <= 0.0 || d2 >= d1) {
        q.status = "indeterminate";
    } else {
        q.order = std::log2(d1 / d2);
        q.status = "ok";
    }
    study.quantities.push_back(q);
    return study;
}

// ---------------------------------------------------------------------------
// Invariant report
// ---------------------------------------------------------------------------

InvariantReport invariant_report(const Trajectory& traj, const Params& params) {
    InvariantReport rep;
    const auto& recs = traj.records;
    if (recs.empty()) throw std::invalid_argument("invariant_report: no records");
    const double E0 = recs.front().e_kin + recs.front().e_pot;

    auto add = [&rep](std::string name, bool pass, double measured, double threshold,
                      std::string detail) {
        rep.checks.push_back({std::move(name), pass, measured, threshold, std::move(detail)});
    };

    double mass_drift = 0.0;
    for (const auto& r : recs) mass_drift = std::max(mass_drift, std::abs(r.mass - 1.0));
    add("mass_drift", mass_drift <= 1e-8, mass_drift, 1e-8, "max |eulerian_mass - 1| over samples");

    double budget = 0.0;
    for (const auto& r : recs) budget = std::max(budget, (r.e_kin + r.e_pot + r.diss_cum) / E0);
    add("energy_budget", budget <= 1.01, budget, 1.01, "max (e_kin+e_pot+diss_cum)/E0");

    double sup_violation = -std::numeric_limits<double>::infinity();
    for (const auto& r : recs) {
        sup_violation = std::max(sup_violation, r.u_max - r.div_l2 * (1.0 + 1e-6));
    }
    add("sup_velocity", sup_violation <= 0.0, sup_violation, 0.0,
        "max (u_max - (1+1e-6) div_l2) over samples");

    double rho_min = std::numeric_limits<double>::infinity();
    double rho_max_pow = 1.0;
    for (const auto& r : recs) {
        rho_min = std::min(rho_min, r.rho_min);
        rho_max_pow = std::max(rho_max_pow, std::pow(r.rho_max, params.gamma));
    }
    add("positivity", rho_min > 0.0, rho_min, 0.0, "min rho over samples");

    if (traj.sample_states.empty()) {
        add("path_ratio", true, 1.0, 0.0, "no snapshot states; vacuously true");
    } else {
        const auto [hi, lo] = path_density_ratio(traj);
        add("path_ratio", lo > 0.0, lo, 0.0,
            "min rho(x,t)/rho(x,0); max ratio " + fmt(hi));
    }

    double bres = traj.max_boundary_residual;
    for (std::size_t i = 1; i < recs.size(); ++i) bres = std::max(bres, recs[i].f_boundary);
    const double bthr = 1e-8 * rho_max_pow;
    add("boundary_residual", bres <= bthr, bres, bthr,
        "max stress-free residual after each step");

    // Growth exponents over the [10, 100] window (vacuous when the run is too
    // short to populate it).
    std::vector<double> ts, as;
    for (const auto& r : recs) {
        if (r.tau >= 10.0 && r.tau <= 100.0) {
            ts.push_back(r.tau);
            as.push_back(r.a);
        }
    }
    const RateVerdict theory = theoretical_rate(params);
    if (ts.size() >= 8) {
        const auto aM = running_max(ts, as);
        const auto fit_lo = fit_growth_exponent(ts, aM, 0.0);
        const double thr_lo = theory.aM_exponent - 0.05;
        add("growth_lower", fit_lo.slope >= thr_lo, fit_lo.slope, thr_lo,
            "fitted a_M exponent vs theoretical lower bound");
        if (params.dim == 2) {
            const auto fit_hi = fit_growth_exponent(ts, as, 0.0);
            add("growth_upper", fit_hi.slope <= 0.55, fit_hi.slope, 0.55,
                "fitted a exponent vs energy upper bound 1/2 + 0.05");
        }
    } else {
        add("growth_lower", true, 0.0, theory.aM_exponent - 0.05,
            "insufficient samples in [10,100]; vacuously true");
        if (params.dim == 2) {
            add("growth_upper", true, 0.0, 0.55,
                "insufficient samples in [10,100]; vacuously true");
        }
    }

    rep.all_pass = std::all_of(rep.checks.begin(), rep.checks.end(),
                               [](const InvariantCheck& c) { return c.pass; });
    return rep;
}

}  // namespace fbns
