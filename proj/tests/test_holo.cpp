#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "atomlink/fft.hpp"
#include "atomlink/holo.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

using namespace atomlink::holo;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// mean wrapped phase increment along x, for blazed-grating checks
double mean_phase_gradient_x(const PhaseMask& mask) {
    double acc = 0.0;
    long n = 0;
    for (std::size_t r = 0; r < mask.n; ++r) {
        for (std::size_t c = 0; c + 1 < mask.n; ++c) {
            double d = mask.phase[r * mask.n + c + 1] - mask.phase[r * mask.n + c];
            d = std::remainder(d, kTwoPi);
            acc += d;
            ++n;
        }
    }
    return acc / static_cast<double>(n);
}
} // namespace

TEST_CASE("target positions form the arithmetic chain") {
    SiteLayout l;
    l.r_ref_um = {0, 0, 0};
    l.delta_r_um = {7.5, 0, 0};
    l.n_sites = 10;
    const auto pos = target_positions(l);
    REQUIRE(pos.size() == 10);
    CHECK(pos.front()[0] == 0.0);
    CHECK(pos.back()[0] == doctest::Approx(67.5));
    for (std::size_t i = 1; i < pos.size(); ++i) {
        CHECK(pos[i][0] - pos[i - 1][0] == doctest::Approx(7.5).epsilon(1e-12));
        CHECK(pos[i][1] == 0.0);
        CHECK(pos[i][2] == 0.0);
    }

    SiteLayout single;
    single.n_sites = 1;
    const auto one = target_positions(single);
    REQUIRE(one.size() == 1);
    CHECK(one[0][0] == single.r_ref_um[0]);
}

TEST_CASE("single off-axis target synthesizes a blazed grating") {
    const double pitch = 0.5;
    const std::size_t n = 128;
    const double offset_um = 10.0; // 20 frequency bins
    const auto result = wgs_synthesize({{offset_um, 0.0}}, n, pitch, 12, 7);

    CHECK(result.metrics.uniformity == doctest::Approx(1.0)); // single spot, by definition
    // phase gradient matches the offset within 2%
    const double expected = kTwoPi * (offset_um / pitch) / static_cast<double>(n);
    const double got = mean_phase_gradient_x(result.mask);
    CHECK(std::fabs(std::fabs(got) - expected) / expected < 0.02);
    // nearly all power lands in the single spot
    CHECK(result.metrics.efficiency > 0.95);
}

TEST_CASE("four symmetric targets reach high uniformity, verified independently") {
    const double pitch = 0.5;
    const std::vector<std::array<double, 2>> targets{{8.0, 0.0}, {-8.0, 0.0}, {0.0, 8.0},
                                                     {0.0, -8.0}};
    const auto result = wgs_synthesize(targets, 256, pitch, 50, 21);
    CHECK(result.metrics.uniformity >= 0.95);

    const auto oracle = propagate_oracle(result.mask, targets);
    CHECK(oracle.uniformity == doctest::Approx(result.metrics.uniformity).epsilon(1e-9));
    CHECK(oracle.efficiency == doctest::Approx(result.metrics.efficiency).epsilon(1e-9));
}

TEST_CASE("ten collinear sites at the array geometry") {
    SiteLayout l;
    l.r_ref_um = {-33.75, 0, 0}; // centered chain, 7.5 um spacing
    l.delta_r_um = {7.5, 0, 0};
    l.n_sites = 10;
    std::vector<std::array<double, 2>> targets;
    for (const auto& p : target_positions(l)) targets.push_back({p[0], p[1]});

    const auto result = wgs_synthesize(targets, 512, 0.5, 50, 33);
    CHECK(result.metrics.uniformity >= 0.90);
    CHECK(result.metrics.efficiency >= 0.5);

    const auto oracle = propagate_oracle(result.mask, targets);
    CHECK(oracle.uniformity == doctest::Approx(result.metrics.uniformity).epsilon(1e-9));

    // uniformity is non-decreasing on average over the last 10 iterations
    const auto& hist = result.metrics.uniformity_history;
    REQUIRE(hist.size() >= 10);
    double avg_delta = 0.0;
    for (std::size_t i = hist.size() - 10; i + 1 < hist.size(); ++i)
        avg_delta += hist[i + 1] - hist[i];
    CHECK(avg_delta / 9.0 > -1e-6);
}

TEST_CASE("synthesis is seed-deterministic, bit for bit") {
    const std::vector<std::array<double, 2>> targets{{5.0, 2.5}, {-4.0, 1.0}};
    const auto a = wgs_synthesize(targets, 128, 0.5, 20, 99);
    const auto b = wgs_synthesize(targets, 128, 0.5, 20, 99);
    REQUIRE(a.mask.phase.size() == b.mask.phase.size());
    for (std::size_t i = 0; i < a.mask.phase.size(); ++i)
        CHECK(a.mask.phase[i] == b.mask.phase[i]);

    const auto c = wgs_synthesize(targets, 128, 0.5, 20, 100);
    bool any_differ = false;
    for (std::size_t i = 0; i < a.mask.phase.size(); ++i)
        if (a.mask.phase[i] != c.mask.phase[i]) any_differ = true;
    CHECK(any_differ);
}

TEST_CASE("mask phases stay in [0, 2pi)") {
    const auto result = wgs_synthesize({{3.0, -1.5}}, 64, 0.5, 5, 5);
    for (const double p : result.mask.phase) {
        CHECK(p >= 0.0);
        CHECK(p < kTwoPi);
    }
}

TEST_CASE("targets outside the field of view are rejected") {
    CHECK_THROWS_AS(wgs_synthesize({{40.0, 0.0}}, 64, 0.5, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(wgs_synthesize({{0.0, 0.0}}, 100, 0.5, 5, 1), std::invalid_argument);
}

TEST_CASE("scan grids") {
    SiteLayout base;
    base.r_ref_um = {1.0, 2.0, 3.0};

    SUBCASE("9x9 xy grid covering +-2 um") {
        const auto grid = scan_grid(base, 2.0, 9, ScanPlane::XY);
        REQUIRE(grid.size() == 81);
        CHECK(grid.front().r_ref_um[0] == doctest::Approx(-1.0)); // 1.0 - 2.0
        CHECK(grid.front().r_ref_um[1] == doctest::Approx(0.0));
        CHECK(grid.back().r_ref_um[0] == doctest::Approx(3.0));
        CHECK(grid.back().r_ref_um[1] == doctest::Approx(4.0));
        // center cell of the grid is the unshifted layout
        const auto& center = grid[4 * 9 + 4];
        CHECK(center.r_ref_um[0] == doctest::Approx(1.0));
        CHECK(center.r_ref_um[1] == doctest::Approx(2.0));
        // z untouched, sites move rigidly
        for (const auto& l : grid) {
            CHECK(l.r_ref_um[2] == 3.0);
            CHECK(l.delta_r_um == base.delta_r_um);
            CHECK(l.n_sites == base.n_sites);
        }
    }

    SUBCASE("single step returns the base") {
        const auto grid = scan_grid(base, 2.0, 1, ScanPlane::XY);
        REQUIRE(grid.size() == 1);
        CHECK(grid[0].r_ref_um == base.r_ref_um);
    }

    SUBCASE("z scan hits the sampled planes") {
        // 129 steps over +-2.56 um step 0.04: contains -2.36, 0.00, +2.56
        SiteLayout zero;
        const auto grid = scan_grid(zero, 2.56, 129, ScanPlane::Z);
        REQUIRE(grid.size() == 129);
        bool has_m236 = false, has_0 = false, has_256 = false;
        for (const auto& l : grid) {
            if (std::fabs(l.r_ref_um[2] + 2.36) < 1e-9) has_m236 = true;
            if (std::fabs(l.r_ref_um[2]) < 1e-9) has_0 = true;
            if (std::fabs(l.r_ref_um[2] - 2.56) < 1e-9) has_256 = true;
        }
        CHECK(has_m236);
        CHECK(has_0);
        CHECK(has_256);
    }
}

TEST_CASE("argmax over scan totals") {
    CHECK(argmax_scan({1.0, 5.0, 3.0}).index == 1);
    CHECK(argmax_scan({1.0, 5.0, 3.0}).value == 5.0);
    // ties break to the lowest index
    CHECK(argmax_scan({2.0, 2.0, 2.0}).index == 0);
    CHECK_THROWS_AS(argmax_scan({}), std::invalid_argument);

    // unimodal synthetic map peaks at its center
    std::vector<double> map(81, 0.0);
    for (int iy = 0; iy < 9; ++iy)
        for (int ix = 0; ix < 9; ++ix)
            map[static_cast<std::size_t>(iy * 9 + ix)] =
                std::exp(-((ix - 4.0) * (ix - 4.0) + (iy - 4.0) * (iy - 4.0)) / 6.0);
    CHECK(argmax_scan(map).index == 4 * 9 + 4);
}

TEST_CASE("mask round trip through the binary format") {
    const auto result = wgs_synthesize({{2.0, 4.0}, {-3.0, 0.0}}, 64, 0.25, 8, 3);
    const std::string path = "mask_fixture.bin";
    save_mask_binary(result.mask, path);
    const auto loaded = load_mask_binary(path);
    CHECK(loaded.n == result.mask.n);
    CHECK(loaded.pitch_um == result.mask.pitch_um);
    REQUIRE(loaded.phase.size() == result.mask.phase.size());
    // float32 storage quantizes
    for (std::size_t i = 0; i < loaded.phase.size(); ++i)
        CHECK(std::fabs(loaded.phase[i] - result.mask.phase[i]) < 1e-6);
    std::remove(path.c_str());
}

TEST_CASE("Parseval holds for the synthesis transform") {
    // already covered against the library FFT; here the mask-level check:
    // a unit-amplitude field keeps its power through one forward pass
    const std::size_t n = 64;
    std::vector<std::complex<double>> field(n * n, {1.0, 0.0});
    atomlink::fft2d_inplace(field, n, false);
    double power = 0.0;
    for (const auto& v : field) power += std::norm(v);
    CHECK(power == doctest::Approx(static_cast<double>(n * n)).epsilon(1e-12));
}
