#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "atomlink/mc.hpp"
#include "atomlink/quantum.hpp"
#include "atomlink/rng.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

using namespace atomlink::mc;
using atomlink::Rng;

namespace {
constexpr double kPi = std::numbers::pi;

EmissionSampler test_sampler() { return EmissionSampler::exponential_fallback(26.0); }

double binom_sigma(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }
} // namespace

TEST_CASE("chain click probability is the factor product") {
    const ChannelChain chain;
    CHECK(chain.click_probability(0) ==
          doctest::Approx(0.9 * 0.67 * 0.009 * 0.8 * 0.8).epsilon(1e-12));
    // channel 1 product sits within a Poisson 3 sigma of 3.4e-3 at 6e4 attempts
    const double p = chain.click_probability(0);
    CHECK(std::fabs(p - 3.4e-3) < 3.0 * binom_sigma(3.4e-3, 6e4));
}

TEST_CASE("sample_detection click statistics") {
    const ChannelChain chain;
    const auto sampler = test_sampler();
    Rng rng(4242, "mc/clicks");
    const double slot_ns = 10e3;

    SUBCASE("atom-present clicks match the chain product over 6e4 attempts") {
        const long n = 60000;
        long clicks = 0;
        for (long i = 0; i < n; ++i) {
            const auto rec = sample_detection(chain, 0, true, sampler, slot_ns, rng);
            if (rec && rec->timestamp_ns < chain.detection_window_ns) ++clicks;
        }
        const double p_hat = static_cast<double>(clicks) / n;
        CHECK(std::fabs(p_hat - chain.click_probability(0)) <
              3.0 * binom_sigma(chain.click_probability(0), n));
    }

    SUBCASE("all efficiencies zero leaves only background") {
        ChannelChain dead = chain;
        for (auto& v : dead.eta_net) v = 0.0;
        const long n = 2000000;
        long clicks = 0;
        for (long i = 0; i < n; ++i)
            if (sample_detection(dead, 0, true, sampler, slot_ns, rng)) ++clicks;
        // background over the whole slot: 23 Hz * 10 us = 2.3e-4
        const double p_bg = 23.0 * slot_ns * 1e-9;
        CHECK(std::fabs(static_cast<double>(clicks) / n - p_bg) < 3.0 * binom_sigma(p_bg, n));
    }

    SUBCASE("background probability within the window is rate * 100 ns") {
        // 23 Hz over 100 ns: 2.3e-6, the same order as the absent-site
        // detection probabilities
        const double p = 23.0 * 100e-9;
        CHECK(p == doctest::Approx(2.3e-6));
        CHECK(p > 1e-6);
        CHECK(p < 1e-5);
    }

    SUBCASE("absent atom never yields an atom-origin click") {
        for (int i = 0; i < 200000; ++i) {
            const auto rec = sample_detection(chain, 0, false, sampler, slot_ns, rng);
            if (rec) CHECK(rec->origin == ClickOrigin::Background);
        }
    }
}

TEST_CASE("emission time sampling") {
    SUBCASE("single-bin profile lands in that bin") {
        Rng rng(7, "mc/delta");
        const std::vector<double> profile{0.0, 0.0, 1.0, 0.0};
        for (int i = 0; i < 1000; ++i) {
            const double t = emission_time_sample(profile, 2.0, rng);
            CHECK(t >= 4.0);
            CHECK(t < 6.0);
        }
    }

    SUBCASE("exponential profile reproduces the analytic mean") {
        Rng rng(8, "mc/exp");
        const double tau = 26.0;
        std::vector<double> profile(400);
        for (std::size_t i = 0; i < profile.size(); ++i)
            profile[i] = std::exp(-static_cast<double>(i) / tau);
        const long n = 200000;
        double sum = 0.0;
        for (long i = 0; i < n; ++i) sum += emission_time_sample(profile, 1.0, rng);
        // mean of the binned truncated exponential, computed analytically
        double mass = 0.0, mean = 0.0;
        for (std::size_t i = 0; i < profile.size(); ++i) {
            mass += profile[i];
            mean += profile[i] * (static_cast<double>(i) + 0.5);
        }
        mean /= mass;
        const double se = tau / std::sqrt(static_cast<double>(n)); // slight overestimate
        CHECK(std::fabs(sum / n - mean) < 3.0 * se);
    }

    SUBCASE("large-sample histogram matches the source profile") {
        Rng rng(9, "mc/hist");
        std::vector<double> profile{0.05, 0.2, 0.4, 0.25, 0.1};
        const long n = 1000000;
        std::vector<long> counts(profile.size(), 0);
        for (long i = 0; i < n; ++i) {
            const auto bin = static_cast<std::size_t>(emission_time_sample(profile, 1.0, rng));
            counts[bin] += 1;
        }
        double chi2 = 0.0;
        for (std::size_t i = 0; i < profile.size(); ++i) {
            const double expect = profile[i] * n;
            chi2 += (counts[i] - expect) * (counts[i] - expect) / expect;
        }
        CHECK(chi2 / static_cast<double>(profile.size() - 1) < 1.5);
    }
}

TEST_CASE("fluorescence sequences") {
    ChannelChain chain;
    SequenceConfig cfg;
    cfg.rng_seed = 11;
    const auto sampler = test_sampler();

    SUBCASE("identical seeds give byte-identical record streams") {
        const auto a = run_fluorescence_sequences(cfg, chain, sampler, 200, 11);
        const auto b = run_fluorescence_sequences(cfg, chain, sampler, 200, 11);
        REQUIRE(a.records.size() == b.records.size());
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            CHECK(a.records[i].sequence_id == b.records[i].sequence_id);
            CHECK(a.records[i].trial_id == b.records[i].trial_id);
            CHECK(a.records[i].channel == b.records[i].channel);
            CHECK(a.records[i].timestamp_ns == b.records[i].timestamp_ns);
            CHECK(a.records[i].origin == b.records[i].origin);
        }
    }

    SUBCASE("thread count does not change the result") {
        const auto a = run_fluorescence_sequences(cfg, chain, sampler, 300, 17, nullptr, 1);
        const auto b = run_fluorescence_sequences(cfg, chain, sampler, 300, 17, nullptr, 3);
        REQUIRE(a.records.size() == b.records.size());
        for (std::size_t i = 0; i < a.records.size(); ++i)
            CHECK(a.records[i].timestamp_ns == b.records[i].timestamp_ns);
        REQUIRE(a.presence == b.presence);
    }

    SUBCASE("zero loading probability yields no atom-origin records") {
        SequenceConfig empty = cfg;
        empty.loading_probability = 0.0;
        const auto run = run_fluorescence_sequences(empty, chain, sampler, 500, 23);
        for (const auto& r : run.records) CHECK(r.origin == ClickOrigin::Background);
    }

    SUBCASE("empirical conditional probability converges at 1/sqrt(N)") {
        // binomial oracle on the chain product at three sample sizes
        const double p = chain.click_probability(0);
        for (const long n_seq : {50L, 500L, 5000L}) {
            const auto run = run_fluorescence_sequences(cfg, chain, sampler, n_seq, 31);
            long attempts = 0, clicks = 0;
            for (const auto& seq : run.presence)
                if (seq[0]) attempts += cfg.trials_per_cycle;
            for (const auto& r : run.records) {
                if (r.channel != 0 || r.timestamp_ns >= chain.detection_window_ns) continue;
                if (run.presence[static_cast<std::size_t>(r.sequence_id)][0]) ++clicks;
            }
            const double p_hat = static_cast<double>(clicks) / static_cast<double>(attempts);
            CHECK(std::fabs(p_hat - p) <
                  4.0 * binom_sigma(p, static_cast<double>(attempts)));
        }
    }

    SUBCASE("injected crosstalk appears at the injected rate") {
        CrosstalkInjection inj{2, 3, 0.05};
        const auto run = run_fluorescence_sequences(cfg, chain, sampler, 20000, 37, &inj);
        long attempts = 0, clicks = 0;
        for (std::size_t s = 0; s < run.presence.size(); ++s)
            if (!run.presence[s][2] && run.presence[s][3]) attempts += cfg.trials_per_cycle;
        for (const auto& r : run.records) {
            if (r.channel != 2 || r.timestamp_ns >= chain.detection_window_ns) continue;
            const auto& seq = run.presence[static_cast<std::size_t>(r.sequence_id)];
            if (!seq[2] && seq[3]) ++clicks;
        }
        const double expect = 0.05 * chain.click_probability(2) + 23e-9 * 100.0 * 2.0;
        const double p_hat = static_cast<double>(clicks) / static_cast<double>(attempts);
        CHECK(std::fabs(p_hat - expect) < 4.0 * binom_sigma(expect, static_cast<double>(attempts)));
    }
}

TEST_CASE("scan simulation") {
    atomlink::holo::SiteLayout base;
    base.r_ref_um = {0, 0, 0};
    const atomlink::optics::CollectionOptics optics;

    SUBCASE("zero displacement has the largest mean counts") {
        const auto layouts = atomlink::holo::scan_grid(base, 2.0, 9, atomlink::holo::ScanPlane::XY);
        const auto res = run_scan_simulation(layouts, optics, base.r_ref_um, 2000.0, 25.0, 30.0,
                                             200, 0.5, 51);
        const auto best = atomlink::holo::argmax_scan(res.totals);
        CHECK(best.index == 4 * 9 + 4);
    }

    SUBCASE("histogram is bimodal when rate * exposure >= 20") {
        // analytic Poisson-mixture separation: with means 0.75 and 60.75 the
        // midpoint mass is far below both modes
        const double lam0 = 25.0 * 0.03, lam1 = 2000.0 * 0.03 + 25.0 * 0.03;
        CHECK(lam1 - lam0 > 20.0);
        CHECK(lam1 - 3.0 * std::sqrt(lam1) > lam0 + 3.0 * std::sqrt(lam0));

        const std::vector<atomlink::holo::SiteLayout> layouts{base};
        const auto res =
            run_scan_simulation(layouts, optics, base.r_ref_um, 2000.0, 25.0, 30.0, 400, 0.5, 77);
        long low = 0, high = 0;
        const double threshold = 0.5 * (lam0 + lam1);
        double low_sum = 0.0, high_sum = 0.0;
        for (const long c : res.counts[0]) {
            if (c < threshold) {
                ++low;
                low_sum += c;
            } else {
                ++high;
                high_sum += c;
            }
        }
        // both modes populated near the loading probability
        CHECK(low > 120);
        CHECK(high > 120);
        // cluster means near the analytic Poisson means
        CHECK(low_sum / low == doctest::Approx(lam0).epsilon(0.35));
        CHECK(high_sum / high == doctest::Approx(lam1).epsilon(0.05));
    }

    SUBCASE("argmax recovers a planted off-center optimum") {
        atomlink::holo::SiteLayout shifted = base;
        const auto layouts =
            atomlink::holo::scan_grid(shifted, 2.0, 9, atomlink::holo::ScanPlane::XY);
        // plant the optimum at grid node (6, 3): offsets (+1.0, -0.5)
        const std::array<double, 3> truth{1.0, -0.5, 0.0};
        int hits = 0;
        for (int trial = 0; trial < 20; ++trial) {
            const auto res = run_scan_simulation(layouts, optics, truth, 2000.0, 25.0, 30.0, 200,
                                                 0.5, 1000 + static_cast<std::uint64_t>(trial));
            if (atomlink::holo::argmax_scan(res.totals).index ==
                static_cast<std::size_t>(3 * 9 + 6))
                ++hits;
        }
        CHECK(hits >= 19); // acceptance runs the 100-trial version
    }
}

TEST_CASE("entanglement sequences") {
    ChannelChain chain;
    SequenceConfig cfg;
    cfg.trials_per_cycle = 30;
    const auto sampler = test_sampler();

    SUBCASE("ideal survival follows cos^2 of the analyzer angle") {
        SequenceConfig ideal = cfg;
        ideal.heating_loss_per_run = 0.0;
        ideal.pushout_error = 0.0;
        ChannelChain clean = chain;
        for (auto& v : clean.background_rate_hz) v = 0.0;
        clean.p_init = 1.0;
        const Imperfections none;
        for (const double theta : {0.0, kPi / 6.0, kPi / 4.0, kPi / 3.0, kPi / 2.0}) {
            const auto run = run_entanglement_sequences(ideal, clean, atomlink::quantum::BasisKind::Circular,
                                                        theta, none, sampler, 0, 40000, 400,
                                                        "ent/test");
            long survived = 0, clicked = 0;
            for (const auto& oc : run.outcomes) {
                if (oc.port != DetectorPort::H) continue;
                ++clicked;
                if (oc.atom_survived) ++survived;
            }
            const double expect = std::cos(theta) * std::cos(theta);
            if (clicked < 50) continue; // H-port starves at cos^2 ~ 0
            const double p_hat = static_cast<double>(survived) / static_cast<double>(clicked);
            CHECK(std::fabs(p_hat - expect) <
                  4.0 * std::sqrt(std::max(expect * (1 - expect), 0.002) /
                                  static_cast<double>(clicked)));
        }
    }

    SUBCASE("linear basis shows no correlation") {
        const Imperfections none;
        for (const double theta : {0.0, kPi / 5.0, kPi / 2.5}) {
            const auto run = run_entanglement_sequences(cfg, chain, atomlink::quantum::BasisKind::Linear,
                                                        theta, none, sampler, 0, 30000, 500,
                                                        "ent/lin");
            long survived = 0, clicked = 0;
            for (const auto& oc : run.outcomes) {
                if (oc.port != DetectorPort::H) continue;
                ++clicked;
                if (oc.atom_survived) ++survived;
            }
            REQUIRE(clicked > 200);
            const double scale = (1.0 - cfg.heating_loss_per_run) *
                                 std::pow(1.0 - cfg.pushout_error, cfg.pushout_repeats);
            const double expect = 0.5 * scale;
            const double p_hat = static_cast<double>(survived) / static_cast<double>(clicked);
            CHECK(std::fabs(p_hat - expect) <
                  4.0 * std::sqrt(0.25 / static_cast<double>(clicked)));
        }
    }

    SUBCASE("sequences stop at the first click") {
        const Imperfections none;
        const auto run = run_entanglement_sequences(cfg, chain, atomlink::quantum::BasisKind::Circular,
                                                    0.3, none, sampler, 0, 5000, 600, "ent/stop");
        std::map<std::int64_t, int> per_seq;
        for (const auto& oc : run.outcomes) {
            per_seq[oc.sequence_id] += 1;
            CHECK(oc.trials_used >= 1);
            CHECK(oc.trials_used <= 30);
        }
        for (const auto& [seq, n] : per_seq) CHECK(n == 1);
    }
}

TEST_CASE("record stream round trip") {
    ChannelChain chain;
    SequenceConfig cfg;
    const auto run = run_fluorescence_sequences(cfg, chain, test_sampler(), 400, 77);
    REQUIRE(!run.records.empty());

    const std::string path = "records_fixture.txt";
    write_records(path, run.records);
    const auto loaded = read_records(path);
    REQUIRE(loaded.size() == run.records.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].sequence_id == run.records[i].sequence_id);
        CHECK(loaded[i].trial_id == run.records[i].trial_id);
        CHECK(loaded[i].channel == run.records[i].channel);
        CHECK(loaded[i].port == run.records[i].port);
        CHECK(loaded[i].origin == run.records[i].origin);
        CHECK(std::fabs(loaded[i].timestamp_ns - run.records[i].timestamp_ns) < 1e-4);
    }
    std::remove(path.c_str());
}

TEST_CASE("tilted joint state matches the ellipticity construction") {
    Imperfections imp;
    imp.tilt_rad = 0.17;
    const auto st = entangled_state(imp);
    CHECK(st.norm() == doctest::Approx(1.0).epsilon(1e-12));
    // the sigma-mixing amplitudes follow (1 +- eps)/(2 sqrt(1+eps^2))
    const double eps = std::cos(0.17);
    const double hi = (1.0 + eps) / (2.0 * std::sqrt(1.0 + eps * eps));
    const double lo = (1.0 - eps) / (2.0 * std::sqrt(1.0 + eps * eps));
    CHECK(st.amp[0].real() == doctest::Approx(hi).epsilon(1e-12));
    CHECK(st.amp[1].real() == doctest::Approx(lo).epsilon(1e-12));
    CHECK(st.amp[2].real() == doctest::Approx(lo).epsilon(1e-12));
    CHECK(st.amp[3].real() == doctest::Approx(hi).epsilon(1e-12));
    // no tilt reproduces the ideal entangled state
    const auto ideal = entangled_state(Imperfections{});
    CHECK(ideal.amp[0].real() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(std::abs(ideal.amp[1]) < 1e-15);
}
