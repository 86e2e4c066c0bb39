#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fbns/profile.hpp"
#include "fbns/solver.hpp"
#include "fbns/types.hpp"

using namespace fbns;

namespace {

// Independent oracle: composite Simpson quadrature for int_0^b f(r) dr.
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    double s = f(a) + f(b);
    const double h = (b - a) / n;
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

LagState constant_state(int n, int dim, double a0 = 1.0) {
    ProfileSpec spec;
    spec.a0 = a0;
    return init_profile(spec, make_params(2.0, 1.0, dim), MassGrid::uniform(n));
}

}  // namespace

TEST_CASE("make_params validates its ranges") {
    const Params p = make_params(2.0, 1.0, 2);
    CHECK(p.gamma == 2.0);
    CHECK(p.mu == 1.0);
    CHECK(p.dim == 2);

    const Params q = make_params(1.5, 0.5, 3);
    CHECK(q.gamma == 1.5);
    CHECK(q.dim == 3);

    CHECK_THROWS_WITH_AS(make_params(1.0, 1.0, 2), "gamma must exceed 1", std::invalid_argument);
    CHECK_THROWS_AS(make_params(2.0, 0.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_params(2.0, 1.0, 4), std::invalid_argument);
}

TEST_CASE("radius_from_density closed forms") {
    const auto grid = MassGrid::uniform(256);

    SUBCASE("rho = 2, d = 2 gives r(x) = sqrt(x)") {
        const std::vector<double> rho(256, 2.0);
        const auto r = radius_from_density(rho, make_params(2.0, 1.0, 2), grid);
        for (int f = 0; f <= 256; ++f) {
            CHECK(std::abs(r[f] - std::sqrt(f * grid.dx)) < 1e-12);
        }
        CHECK(r[64] == doctest::Approx(0.5).epsilon(1e-13));   // r(0.25)
        CHECK(r[256] == doctest::Approx(1.0).epsilon(1e-13));  // r(1)
    }

    SUBCASE("rho = 3, d = 3 gives r(x) = x^(1/3)") {
        const std::vector<double> rho(256, 3.0);
        const auto r = radius_from_density(rho, make_params(2.0, 1.0, 3), grid);
        CHECK(r[32] == doctest::Approx(0.5).epsilon(1e-13));  // r(0.125) = 0.5
        for (int f = 0; f <= 256; ++f) {
            CHECK(std::abs(r[f] - std::cbrt(f * grid.dx)) < 1e-12);
        }
    }

    SUBCASE("non-positive density is rejected") {
        std::vector<double> rho(16, 1.0);
        rho[7] = 0.0;
        CHECK_THROWS_AS(radius_from_density(rho, make_params(2.0, 1.0, 2), MassGrid::uniform(16)),
                        std::invalid_argument);
    }
}

TEST_CASE("radius/density inversion is the identity to machine precision") {
    std::mt19937 rng(1234);
    std::uniform_real_distribution<double> jitter(0.5, 3.0);
    for (int dim : {2, 3}) {
        const auto grid = MassGrid::uniform(64);
        const Params p = make_params(1.4, 0.7, dim);
        std::vector<double> rho(64);
        for (auto& v : rho) v = jitter(rng);
        const auto r = radius_from_density(rho, p, grid);
        const auto back = density_from_radii(r, p, grid);
        for (int i = 0; i < 64; ++i) {
            CHECK(back[i] == doctest::Approx(rho[i]).epsilon(1e-13));
        }
    }
}

TEST_CASE("radius_from_density matches a fine-grid quadrature oracle at O(dx^2)") {
    // Smooth density as a function of the mass coordinate; the oracle
    // integrates 1/rho on a 64x finer grid with the trapezoid rule.
    const auto rho_of_x = [](double x) { return 2.0 + 0.5 * std::sin(3.0 * x) + 0.3 * x; };
    const Params p = make_params(2.0, 1.0, 2);

    auto max_error = [&](int n) {
        const auto grid = MassGrid::uniform(n);
        std::vector<double> rho(n);
        for (int i = 0; i < n; ++i) rho[i] = rho_of_x((i + 0.5) * grid.dx);
        const auto r = radius_from_density(rho, p, grid);

        const int fine = 64 * n;
        const double h = 1.0 / fine;
        double acc = 0.0, err = 0.0;
        int f = 1;
        for (int j = 0; j < fine; ++j) {
            acc += 0.5 * h * (1.0 / rho_of_x(j * h) + 1.0 / rho_of_x((j + 1) * h));
            if ((j + 1) % 64 == 0) {
                const double oracle = std::sqrt(2.0 * acc);
                err = std::max(err, std::abs(r[f] - oracle));
                ++f;
            }
        }
        return err;
    };

    const double e64 = max_error(64);
    const double e128 = max_error(128);
    CHECK(e64 < 1e-4);
    CHECK(e128 <= e64 / 2.0 * 1.05);  // first order or better under doubling
}

TEST_CASE("init_profile: constant profile") {
    SUBCASE("d = 2 normalizes to rho = 2") {
        const auto st = constant_state(256, 2);
        for (double v : st.rho) CHECK(v == 2.0);
        for (double v : st.u) CHECK(v == 0.0);
        CHECK(st.tau == 0.0);
        CHECK(eulerian_mass(st, make_params(2.0, 1.0, 2)) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("d = 3 normalizes to rho = 3") {
        const auto st = constant_state(256, 3);
        for (double v : st.rho) CHECK(v == 3.0);
        CHECK(eulerian_mass(st, make_params(2.0, 1.0, 3)) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("init_profile: parabolic profile is normalized by quadrature") {
    const Params p = make_params(2.0, 1.0, 2);
    ProfileSpec spec;
    spec.kind = ProfileSpec::Kind::parabolic;
    spec.parabolic_b = 1.2;
    const auto grid = MassGrid::uniform(256);
    const auto st = init_profile(spec, p, grid);

    // oracle: c such that c * int_0^1 (1.2 - r^2) r dr = 1
    const double raw = simpson([](double r) { return (1.2 - r * r) * r; }, 0.0, 1.0, 1 << 12);
    const double c = 1.0 / raw;
    CHECK(c == doctest::Approx(1.0 / 0.35).epsilon(1e-12));

    CHECK(std::abs(eulerian_mass(st, p) - 1.0) < 1e-12);

    // cell densities track c*(1.2 - r^2) at cell centers to O(dx^2); the
    // first cells are skipped (their radial extent is O(sqrt(dx)))
    const double dx2 = grid.dx * grid.dx;
    for (int i = 17; i < grid.n_cells; i += 17) {
        const double rc = 0.5 * (st.r[i] + st.r[i + 1]);
        CHECK(std::abs(st.rho[i] - c * (1.2 - rc * rc)) < 50.0 * dx2);
    }
    CHECK(st.r.back() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("init_profile: generated states satisfy the mass and ordering invariants") {
    const Params p2 = make_params(2.0, 1.0, 2);
    std::vector<ProfileSpec> specs(4);
    specs[0].kind = ProfileSpec::Kind::constant;
    specs[1].kind = ProfileSpec::Kind::parabolic;
    specs[2].kind = ProfileSpec::Kind::gaussian_bump;
    specs[2].bump_amp = 2.0;
    specs[3].kind = ProfileSpec::Kind::table;
    specs[3].table_r = {0.0, 0.3, 0.7, 1.0};
    specs[3].table_rho = {2.0, 1.5, 1.0, 0.4};
    for (auto& spec : specs) {
        const auto st = init_profile(spec, p2, MassGrid::uniform(256));
        CHECK(std::abs(eulerian_mass(st, p2) - 1.0) < 1e-10);
        for (int f = 0; f < 256; ++f) CHECK(st.r[f + 1] > st.r[f]);
        for (double v : st.rho) CHECK(v > 0.0);
        CHECK_NOTHROW(validate_state(st, p2));
    }
}

TEST_CASE("init_profile: velocity sampling and error paths") {
    const Params p = make_params(2.0, 1.0, 2);

    SUBCASE("linear velocity is sampled at faces with u(0) = 0") {
        ProfileSpec spec;
        spec.u0_kind = ProfileSpec::VelKind::linear;
        spec.u0_slope = 0.5;
        const auto st = init_profile(spec, p, MassGrid::uniform(64));
        CHECK(st.u[0] == 0.0);
        for (int f = 1; f <= 64; ++f) CHECK(st.u[f] == doctest::Approx(0.5 * st.r[f]));
    }

    SUBCASE("tabulated velocity is interpolated at faces") {
        ProfileSpec spec;
        spec.u0_kind = ProfileSpec::VelKind::table;
        spec.u0_table_r = {0.0, 0.5, 1.0};
        spec.u0_table_u = {0.0, 0.2, 0.1};
        const auto st = init_profile(spec, p, MassGrid::uniform(64));
        CHECK(st.u[0] == 0.0);
        for (int f = 1; f <= 64; ++f) {
            const double r = st.r[f];
            const double expect = r <= 0.5 ? 0.4 * r : 0.2 + (r - 0.5) * (-0.2);
            CHECK(st.u[f] == doctest::Approx(expect).epsilon(1e-12));
        }
    }

    SUBCASE("epsilon regularization keeps the mass normalized") {
        ProfileSpec spec;
        spec.kind = ProfileSpec::Kind::parabolic;
        spec.epsilon = 1e-3;
        spec.u0_kind = ProfileSpec::VelKind::linear;
        spec.u0_slope = 0.25;
        const auto st = init_profile(spec, p, MassGrid::uniform(128));
        CHECK(std::abs(eulerian_mass(st, p) - 1.0) < 1e-10);
        CHECK(st.u[0] == 0.0);
        // the velocity rescaling rho/(rho+eps)*N is a small perturbation
        for (int f = 8; f <= 128; f += 24) {
            CHECK(st.u[f] == doctest::Approx(0.25 * st.r[f]).epsilon(5e-3));
        }
    }

    SUBCASE("non-monotone table radii are rejected") {
        ProfileSpec spec;
        spec.kind = ProfileSpec::Kind::table;
        spec.table_r = {0.0, 0.6, 0.4, 1.0};
        spec.table_rho = {1.0, 1.0, 1.0, 1.0};
        CHECK_THROWS_AS(init_profile(spec, p, MassGrid::uniform(16)), std::invalid_argument);
    }

    SUBCASE("non-positive shape is rejected") {
        ProfileSpec spec;
        spec.kind = ProfileSpec::Kind::table;
        spec.table_r = {0.0, 1.0};
        spec.table_rho = {0.0, 0.0};
        CHECK_THROWS_AS(init_profile(spec, p, MassGrid::uniform(16)), std::invalid_argument);
    }

    SUBCASE("boundary-vacuum data are floored and stay positive") {
        ProfileSpec spec;
        spec.kind = ProfileSpec::Kind::table;
        spec.table_r = {0.0, 0.9, 1.0};
        spec.table_rho = {2.0, 1.0, 0.0};  // vacuum at the boundary
        const auto st = init_profile(spec, p, MassGrid::uniform(128));
        for (double v : st.rho) CHECK(v > 0.0);
        CHECK(std::abs(eulerian_mass(st, p) - 1.0) < 1e-10);
    }
}

TEST_CASE("eulerian_mass stays at 1 along a simulated run") {
    const Params p = make_params(2.0, 1.0, 2);
    LagState st = constant_state(64, 2);
    StepConfig cfg;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        auto [next, rep] = step(st, cfg, p);
        st = std::move(next);
        worst = std::max(worst, std::abs(eulerian_mass(st, p) - 1.0));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("validate_state catches corrupted states") {
    const Params p = make_params(2.0, 1.0, 2);
    auto st = constant_state(32, 2);
    CHECK_NOTHROW(validate_state(st, p));

    auto bad = st;
    bad.rho[5] *= 1.5;  // breaks the Jacobian identity
    CHECK_THROWS_AS(validate_state(bad, p), std::invalid_argument);

    bad = st;
    std::swap(bad.r[3], bad.r[4]);
    CHECK_THROWS_AS(validate_state(bad, p), std::invalid_argument);
}
