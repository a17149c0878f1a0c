#include <doctest.h>

#include <cmath>
#include <numbers>

#include "calibnet/energy.hpp"
#include "calibnet/fixtures.hpp"
#include "calibnet/partition.hpp"
#include "calibnet/stationarity.hpp"

using namespace calibnet;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

double rad(double d) { return d * kPi / 180.0; }

// Endpoint oracle for the equilibrium residual of a star whose rays leave the support of a
// bump centred at the star centre: only the centre contributes, -2 eta(0) . sum sigma t.
double star_endpoint_oracle(const Network& net, Vec2 eta0) {
    Vec2 s{};
    for (int e = 0; e < static_cast<int>(net.edges.size()); ++e) s += net.tangent(e) * net.sigma(e);
    return 2.0 * std::abs(dot(eta0, s));
}

}  // namespace

TEST_CASE("Steiner fork length") {
    CHECK(fork_length(2.0 * kPi / 3.0) == Approx(2.0).epsilon(1e-15));
    CHECK(fork_length(kPi / 2.0) == Approx(2.0 * std::sin(rad(75.0))).epsilon(1e-15));
    CHECK(fork_length(1e-9) == Approx(1.0).epsilon(1e-8));
    CHECK_THROWS_AS(fork_length(0.0), InputError);
    CHECK_THROWS_AS(fork_length(2.2), InputError);
}

TEST_CASE("fork construction meets at 120 degrees") {
    const double r = 0.4;
    for (double alpha : {0.3, 1.0, kPi / 2.0, 2.0}) {
        Vec2 x{0.1, -0.2};
        Vec2 a = x + from_angle(0.7) * r, b = x + from_angle(0.7 + alpha) * r;
        auto f = build_fork(x, r, a, b);
        CHECK(f.alpha == Approx(alpha));
        CHECK(f.total_length == Approx(r * fork_length(alpha)).epsilon(1e-12));
        Vec2 u1 = x - f.branch, u2 = a - f.branch, u3 = b - f.branch;
        CHECK(angle_between(u1, u2) == Approx(2.0 * kPi / 3.0).epsilon(1e-12));
        CHECK(angle_between(u2, u3) == Approx(2.0 * kPi / 3.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(build_fork({0, 0}, 1.0, {1, 0}, {0.5, 0.5}), InputError);
}

TEST_CASE("equilibrium residual") {
    for (const auto& p : {fixtures::diameter(), fixtures::junction(), fixtures::hexagon(0.6), fixtures::four_phase(),
                          fixtures::weighted_junction()}) {
        for (const auto& name : builtin_field_names()) {
            auto r = euler_lagrange_residual(p.net, builtin_field(name, p.net.domain));
            CHECK(r.residual <= 1e-12);
            CHECK(r.telescoped <= 1e-12);
        }
    }
    // Unbalanced junction: the residual is the endpoint sum at the centre.
    auto bad = fixtures::junction_with_angles(90, 135, 135);
    for (Vec2 v : {Vec2{1, 0}, Vec2{0, 1}}) {
        TestField eta{{{{0, 0}, 0.5, v}}};
        auto r = euler_lagrange_residual(bad.net, eta);
        CHECK(r.residual == Approx(star_endpoint_oracle(bad.net, v)).epsilon(1e-12));
        CHECK(r.telescoped == Approx(r.residual).epsilon(1e-12));
    }
    // The cross is not stationary but smooth variations do not see it.
    auto cross = fixtures::cross();
    for (const auto& name : builtin_field_names())
        CHECK(euler_lagrange_residual(cross.net, builtin_field(name, cross.net.domain)).residual <= 1e-12);
    TestField touching{{{{0.5, 0}, 0.6, {1, 0}}}};
    CHECK_THROWS_AS(euler_lagrange_residual(cross.net, touching), InputError);
    CHECK_THROWS_AS(builtin_field("nope", cross.net.domain), InputError);
}

TEST_CASE("bump jacobian matches finite differences") {
    RadialBump b{{0.1, 0.2}, 0.7, {0.6, -0.8}};
    for (Vec2 y : {Vec2{0.3, 0.1}, Vec2{-0.2, 0.5}, Vec2{0.5, 0.5}}) {
        Jacobian J = b.jacobian(y);
        const double h = 1e-6;
        Vec2 dx = (b.value(y + Vec2{h, 0}) - b.value(y - Vec2{h, 0})) / (2 * h);
        Vec2 dy = (b.value(y + Vec2{0, h}) - b.value(y - Vec2{0, h})) / (2 * h);
        CHECK(J.a11 == Approx(dx.x).epsilon(1e-6));
        CHECK(J.a21 == Approx(dx.y).epsilon(1e-6));
        CHECK(J.a12 == Approx(dy.x).epsilon(1e-6));
        CHECK(J.a22 == Approx(dy.y).epsilon(1e-6));
    }
}

TEST_CASE("circle cuts") {
    auto j = fixtures::junction();
    auto c = circle_cut(j.net, {0, 0}, 0.3);
    CHECK(c.hits.size() == 3);
    CHECK(c.ratio == Approx(3.0));
    CHECK(c.identity_applies);
    CHECK(c.identity_residual <= 1e-12);
    // A chord that misses the centre: length 2 sqrt(r^2 - d^2), two hits at cos alpha = sqrt(1 - d^2/r^2).
    auto d = fixtures::diameter();
    auto cc = circle_cut(d.net, {0.2, 0.1}, 0.3);
    CHECK(cc.length_in_ball == Approx(2.0 * std::sqrt(0.09 - 0.01)));
    CHECK(cc.identity_applies);
    CHECK(cc.identity_residual <= 1e-12);
    // Junction strictly inside the ball away from the centre: identity not applicable.
    auto off = circle_cut(j.net, {0.1, 0.0}, 0.3);
    CHECK_FALSE(off.identity_applies);
    CHECK_THROWS_AS(circle_cut(fixtures::hexagon(0.6).net, {0, 0}, 0.6), NonGenericRadius);
    CHECK_THROWS_AS(circle_cut(j.net, {0.1, 0.0}, 0.1), NonGenericRadius);  // tangent to the vertical ray
    CHECK_THROWS_AS(circle_cut(j.net, {0.5, 0.0}, 0.6), InputError);
}

TEST_CASE("monotonicity") {
    auto j = fixtures::junction();
    auto mp = monotonicity_profile(j.net, {0.1, 0.07}, {0.05, 0.2, 0.35, 0.5, 0.65, 0.8});
    CHECK(mp.nondecreasing);
    CHECK(mp.samples.front().second == 0.0);
    auto centre = monotonicity_profile(j.net, {0, 0}, {0.1, 0.5, 0.9});
    for (auto [r, q] : centre.samples) CHECK(q == Approx(3.0));
    // Unequal tensions: the weighted ratio at the junction is the total tension of its rays.
    auto w = fixtures::weighted_junction();
    double s = 0.0;
    for (int e = 0; e < static_cast<int>(w.net.edges.size()); ++e) s += w.net.sigma(e);
    auto wc = monotonicity_profile(w.net, w.net.vertices[0], {0.1, 0.4});
    for (auto [r, q] : wc.samples) CHECK(q == Approx(physical_energy(w.net)));
    CHECK(s == Approx(physical_energy(w.net)));
}

TEST_CASE("point classification") {
    SUBCASE("balanced junction and segment interior") {
        auto j = fixtures::junction();
        CHECK(classify_point(j.net, {0, 0}, 0.2).cls == PointClass::Triple120);
        CHECK(classify_point(j.net, {0, 0.5}, 0.1).cls == PointClass::InteriorSegment);
        CHECK(classify_point(j.net, {-0.5, 0.3}, 0.1).cls == PointClass::Empty);
    }
    SUBCASE("cross: fork on a right angle") {
        auto c = classify_point(fixtures::cross().net, {0, 0}, 0.25);
        CHECK(c.cls == PointClass::NonStationary);
        REQUIRE(c.witness);
        CHECK(c.witness->kind == "fork");
        CHECK(c.witness->gain == Approx((2.0 - 2.0 * std::sin(rad(75.0))) * 0.25).epsilon(1e-12));
    }
    SUBCASE("unbalanced junction: fork on the 90 degree sector") {
        auto c = classify_point(fixtures::junction_with_angles(90, 135, 135).net, {0, 0}, 0.3);
        CHECK(c.cls == PointClass::NonStationary);
        REQUIRE(c.witness);
        CHECK(c.witness->alpha == Approx(kPi / 2.0));
        CHECK(c.witness->gain == Approx(c.witness->predicted_gain).epsilon(1e-12));
        CHECK(c.witness->gain > 0.0);
    }
    SUBCASE("kink: chord shortcut") {
        auto kink = fixtures::star({0.0, rad(150.0)}, {0, 1}, SurfaceTensionMatrix::equal(2));
        const double r = 0.3;
        auto c = classify_point(kink.net, {0, 0}, r);
        CHECK(c.cls == PointClass::NonStationary);
        REQUIRE(c.witness);
        CHECK(c.witness->kind == "chord");
        // chord of a 150 degree arc: 2 r sin 75
        CHECK(c.witness->gain == Approx(2.0 * r - 2.0 * r * std::sin(rad(75.0))).epsilon(1e-12));
    }
    SUBCASE("eight rays: fork on a 45 degree pair") {
        auto c = classify_point(fixtures::star8().net, {0, 0}, 0.3);
        CHECK(c.cls == PointClass::NonStationary);
        REQUIRE(c.witness);
        CHECK(c.witness->gain == Approx((2.0 - fork_length(kPi / 4.0)) * 0.3).epsilon(1e-12));
    }
    SUBCASE("hit count must be stable") {
        auto j = fixtures::junction();
        CHECK_THROWS_AS(classify_point(j.net, {0.15, 0}, 0.2), UnstableHitCount);
    }
}

TEST_CASE("automatic probes on valid flat fixtures are stationary") {
    for (const auto& p : {fixtures::diameter(), fixtures::junction(), fixtures::hexagon(0.6), fixtures::four_phase(),
                          fixtures::weighted_junction()}) {
        for (Vec2 x : auto_probe_points(p.net)) {
            auto c = classify_point(p.net, x, auto_probe_radius(p.net, x));
            CHECK_MESSAGE((c.cls == PointClass::Triple120 || c.cls == PointClass::InteriorSegment),
                          x.x << "," << x.y << " " << to_string(c.cls) << " hits " << c.hits);
        }
    }
}

TEST_CASE("filling a ball") {
    auto s8 = fixtures::star8();
    const double r = 0.3;
    auto fb = fill_ball_competitor(s8.net, {0, 0}, r, 0);
    CHECK(validate_polygonal(fb.competitor).empty());
    CHECK(fb.length_in_ball_before == Approx(8.0 * r));
    CHECK(fb.length_in_ball_after <= 2.0 * kPi * r);
    CHECK(fb.length_in_ball_before - fb.length_in_ball_after >= (8.0 - 2.0 * kPi) * r);
    CHECK(same_trace(fb.competitor.net, s8.net));
    CHECK(phase_at(fb.competitor.net, {0.01, 0.2}) == 0);
    CHECK(phase_at(fb.competitor.net, {-0.2, -0.1}) == 0);
    CHECK(phase_at(fb.competitor.net, {-0.5, -0.2}) == phase_at(s8.net, {-0.5, -0.2}));

    // A ball that misses the network leaves it unchanged.
    auto d = fixtures::diameter();
    auto same = fill_ball_competitor(d.net, {0, 0.5}, 0.2, 0);
    CHECK(same.competitor.net.edges.size() == 1);
    // Filling with the other phase draws a closed polygon.
    auto island = fill_ball_competitor(d.net, {0, 0.5}, 0.2, 1);
    CHECK(validate_polygonal(island.competitor).empty());
    CHECK(island.length_in_ball_after == Approx(2.0 * kPi * 0.2).epsilon(1e-3));
}
