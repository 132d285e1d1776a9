// Acceptance suite: every release criterion as an executable check, one
// pass/fail line each. Run with no arguments for the full set or with a
// criterion number to run one. Exit code 0 only when every selected
// criterion passes.

#include "atomlink/analysis.hpp"
#include "atomlink/bloch.hpp"
#include "atomlink/coupling.hpp"
#include "atomlink/harness.hpp"
#include "atomlink/holo.hpp"
#include "atomlink/mc.hpp"
#include "atomlink/planner.hpp"
#include "atomlink/quantum.hpp"
#include "atomlink/rng.hpp"
#include "atomlink/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace atomlink;
constexpr double kPi = std::numbers::pi;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

double binom_sigma(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

// ---------------------------------------------------------------------------

bool criterion_excitation_efficiency(std::string& detail) {
    Timer timer;
    const harness::ReferenceExcitation ref;
    bloch::PulseSpec spec;
    spec.kind = bloch::PulseKind::SmoothedSquare;
    spec.fwhm_ns = ref.fwhm_ns;
    spec.rise_time_ns = ref.rise_time_ns;
    spec.peak_omega = ref.peak_omega;
    spec.center_ns = ref.t0_ns;
    bloch::TwoLevelParams params{bloch::pulse_envelope(spec), ref.detuning, ref.dephasing,
                                 bloch::default_decay_per_ns};
    const auto traj = bloch::integrate(params, bloch::BlochState{}, {0.0, 170.0}, 0.05);
    const double eta = bloch::excitation_efficiency(
        traj, {ref.window_start_ns, ref.window_start_ns + ref.window_ns});
    const double elapsed = timer.seconds();

    std::ostringstream os;
    os << "eta_ext = " << eta << " (target 0.67 +- 0.03), " << elapsed << " s";
    detail = os.str();
    return std::fabs(eta - 0.67) <= 0.03 && elapsed < 1.0;
}

bool criterion_free_decay(std::string& detail) {
    bloch::TwoLevelParams params; // no drive
    const auto traj =
        bloch::integrate(params, {0.0, 1.0, {0.0, 0.0}, 0.0}, {0.0, 400.0}, 0.5);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const double expect = std::exp(-bloch::default_decay_per_ns * traj.time_at(i));
        worst = std::max(worst, std::fabs(traj.states[i].rho22 - expect));
    }
    const double out_gap = std::fabs(traj.states.back().rho_out - 2.0 / 3.0);
    std::ostringstream os;
    os << "max |rho22 - exp(-Gamma t)| = " << worst << " (<= 1e-6), |rho_out(inf) - 2/3| = "
       << out_gap << " (<= 1e-4)";
    detail = os.str();
    return worst <= 1e-6 && out_gap <= 1e-4;
}

bool criterion_fit_round_trip(std::string& detail) {
    Timer timer;
    const double fwhm = 60.0, omega = 0.5, gamma = 0.01, t0 = 45.0, rise = 15.0;
    const auto clean = bloch::model_profile(fwhm, omega, 0.0, gamma, t0,
                                            bloch::PulseKind::SmoothedSquare, rise, 1.0, 150.0);
    int good = 0;
    const int trials = 100;
    for (int k = 0; k < trials; ++k) {
        Rng rng(9000 + static_cast<std::uint64_t>(k), "acceptance/fit-trial");
        std::vector<double> noisy(clean.size());
        for (std::size_t i = 0; i < clean.size(); ++i)
            noisy[i] = static_cast<double>(rng.poisson(clean[i] * 1e4));
        const auto fit = bloch::fit_profile(noisy, 1.0, bloch::PulseKind::SmoothedSquare, rise);
        if (std::fabs(fit.fwhm_ns - fwhm) / fwhm < 0.05 &&
            std::fabs(fit.peak_omega - omega) / omega < 0.10)
            ++good;
    }
    std::ostringstream os;
    os << good << "/100 trials recovered FWHM within 5% and Omega within 10% (need >= 95), "
       << timer.seconds() << " s";
    detail = os.str();
    return good >= 95;
}

const std::vector<double> kTableP = {3.4e-3, 3.0e-3, 3.5e-3, 3.9e-3, 2.6e-3,
                                     1.3e-3, 3.8e-3, 4.7e-3, 1.1e-3, 1.9e-3};
const std::vector<double> kTableEtaNetPct = {0.9, 0.8, 0.9, 1.0, 0.7, 0.3, 1.0, 1.2, 0.3, 0.5};

bool criterion_table_reproduction(std::string& detail) {
    Timer timer;
    mc::ChannelChain chain;
    mc::SequenceConfig cfg;
    cfg.detection_slot_us = 12.0;
    const auto sampler = mc::EmissionSampler(harness::reference_emission_profile(), 1.0);
    // 3000 sequences x 40 trials at 0.5 loading: ~6e4 present attempts/channel
    const auto run = mc::run_fluorescence_sequences(cfg, chain, sampler, 3000, 20240601);
    const auto probs = analysis::conditional_probs(run.records, run.presence,
                                                   cfg.trials_per_cycle, 100.0);
    bool ok = true;
    double worst_pull_a = 0.0, worst_pull_b = 0.0;
    long min_attempts = 1L << 30;
    for (int ch = 0; ch < chain.n_channels(); ++ch) {
        const auto& pa = probs.given_present[static_cast<std::size_t>(ch)];
        const auto& pb = probs.given_absent[static_cast<std::size_t>(ch)];
        min_attempts = std::min(min_attempts, pa.attempts);
        const double table = kTableP[static_cast<std::size_t>(ch)];
        const double pull_a = std::fabs(pa.p - table) /
                              binom_sigma(table, static_cast<double>(pa.attempts));
        const double p_bg = chain.background_rate_hz[static_cast<std::size_t>(ch)] * 100e-9;
        const double pull_b = std::fabs(pb.p - p_bg) /
                              binom_sigma(std::max(p_bg, 1e-9), static_cast<double>(pb.attempts));
        worst_pull_a = std::max(worst_pull_a, pull_a);
        worst_pull_b = std::max(worst_pull_b, pull_b);
        if (pull_a > 3.0 || pull_b > 3.0) ok = false;
    }
    const double elapsed = timer.seconds();
    std::ostringstream os;
    os << "worst pull P(p|a) " << worst_pull_a << " sigma, P(p|~a) " << worst_pull_b
       << " sigma (<= 3), attempts/channel >= " << min_attempts << ", " << elapsed << " s";
    detail = os.str();
    return ok && elapsed < 60.0;
}

bool criterion_crosstalk(std::string& detail) {
    Timer timer;
    mc::ChannelChain chain;
    mc::SequenceConfig cfg;
    // paper-scale statistics: 1.6e5 sequences x 40 trials
    const auto sampler = mc::EmissionSampler::exponential_fallback();
    const auto run = mc::run_fluorescence_sequences(cfg, chain, sampler, 160000, 77001);
    const auto m = analysis::crosstalk_matrix(run.records, run.presence, cfg.trials_per_cycle,
                                              100.0);
    double worst = 0.0;
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j)
            if (i != j && m.is_defined(i, j)) worst = std::max(worst, m.at(i, j));

    // known-injection oracle
    const mc::CrosstalkInjection inj{2, 3, 0.05};
    const auto run2 = mc::run_fluorescence_sequences(cfg, chain, sampler, 30000, 77002, &inj);
    const auto m2 = analysis::crosstalk_matrix(run2.records, run2.presence, cfg.trials_per_cycle,
                                               100.0);
    const double p_inj = 0.05 * chain.click_probability(2) + 23.0 * 100e-9;
    const double sigma = std::sqrt(p_inj / static_cast<double>(m2.attempts_at(2, 3))) /
                         chain.click_probability(2);
    const double gap = std::fabs(m2.at(2, 3) - 0.05);

    std::ostringstream os;
    os << "max off-diagonal " << worst << " (< 1e-2); injected 0.05 recovered as " << m2.at(2, 3)
       << " (|gap| " << gap << " <= 3 sigma = " << 3.0 * sigma << "), " << timer.seconds() << " s";
    detail = os.str();
    return worst < 1e-2 && gap <= 3.0 * sigma;
}

bool criterion_net_coupling(std::string& detail) {
    double worst_pp = 0.0;
    for (std::size_t ch = 0; ch < kTableP.size(); ++ch) {
        const double eta_pct =
            100.0 * analysis::infer_net_coupling(kTableP[ch], 0.9, 0.67, 0.8, 0.8);
        worst_pp = std::max(worst_pp, std::fabs(eta_pct - kTableEtaNetPct[ch]));
    }
    std::ostringstream os;
    os << "worst |eta_net - reference| = " << worst_pp << " percentage points (<= 0.1)";
    detail = os.str();
    return worst_pp <= 0.1;
}

struct SweepResult {
    analysis::FringeFit fit;
    long total_clicks = 0;
};

SweepResult run_sweep(quantum::BasisKind basis, const mc::Imperfections& imp,
                      const mc::ChannelChain& chain, const mc::SequenceConfig& cfg,
                      long sequences_per_angle, std::uint64_t seed) {
    std::vector<double> angles;
    for (int i = 0; i < 12; ++i) angles.push_back(kPi * i / 12.0);
    const auto sampler = mc::EmissionSampler::exponential_fallback();
    const auto sweep = mc::run_entanglement_sweep(cfg, chain, basis, angles, imp, sampler, 0,
                                                  sequences_per_angle, seed);
    std::vector<long> succ, tri;
    std::vector<double> used;
    SweepResult out;
    for (const auto& pt : sweep) {
        out.total_clicks += pt.clicked_h + pt.clicked_v;
        if (pt.clicked_h == 0) continue;
        used.push_back(pt.angle);
        succ.push_back(pt.survived_h);
        tri.push_back(pt.clicked_h);
    }
    out.fit = analysis::fit_fringe(used, succ, tri, quantum::hwp_angle_scale);
    return out;
}

bool criterion_fringes(std::string& detail) {
    Timer timer;
    mc::SequenceConfig ideal_cfg;
    ideal_cfg.trials_per_cycle = 30;
    ideal_cfg.heating_loss_per_run = 0.0;
    ideal_cfg.pushout_error = 0.0;
    mc::ChannelChain ideal_chain;
    ideal_chain.p_init = 1.0;
    for (auto& v : ideal_chain.background_rate_hz) v = 0.0;
    const mc::Imperfections none;

    // ~1e4 detected events across the sweep in each basis
    const auto circ = run_sweep(quantum::BasisKind::Circular, none, ideal_chain, ideal_cfg, 8000,
                                31001);
    const auto lin = run_sweep(quantum::BasisKind::Linear, none, ideal_chain, ideal_cfg, 8000,
                               31002);

    // documented imperfection budget at the realistic chain
    mc::SequenceConfig budget_cfg;
    budget_cfg.trials_per_cycle = 30; // heating 0.05, pushout 0.02 x 5 from defaults
    mc::ChannelChain budget_chain;    // p_init 0.9, backgrounds from the reference table
    mc::Imperfections budget;
    budget.tilt_rad = 0.17;
    const auto bud = run_sweep(quantum::BasisKind::Circular, budget, budget_chain, budget_cfg,
                               9000, 31003);

    std::ostringstream os;
    os << "ideal circular V=|A|/C " << circ.fit.visibility << ", 2|A| "
       << circ.fit.visibility_two_a << " (> 0.99, " << circ.total_clicks << " events); "
       << "linear |A|/C " << lin.fit.visibility << " (< 0.05); "
       << "budget 2|A| " << bud.fit.visibility_two_a << " (within [0.78, 0.92]; |A|/C "
       << bud.fit.visibility << "), " << timer.seconds() << " s";
    detail = os.str();
    return circ.fit.visibility > 0.99 && circ.fit.visibility_two_a > 0.99 &&
           circ.total_clicks >= 10000 && lin.total_clicks >= 10000 &&
           lin.fit.visibility < 0.05 && bud.fit.visibility_two_a >= 0.78 &&
           bud.fit.visibility_two_a <= 0.92;
}

bool criterion_purity(std::string& detail) {
    const quantum::StokesVector vectors[4] = {{0.09, 0.00, 0.88},
                                              {0.09, -0.01, -0.83},
                                              {0.01, -0.09, -0.02},
                                              {0.15, 0.02, 0.04}};
    const double expected[4] = {0.89, 0.85, 0.50, 0.50};
    bool ok = true;
    std::ostringstream os;
    os << "purities";
    for (int i = 0; i < 4; ++i) {
        const double p = quantum::stokes_and_purity(vectors[i]);
        const double rounded = std::round(p * 100.0) / 100.0;
        os << " " << p << "->" << rounded << " (want " << expected[i] << ")";
        if (std::fabs(rounded - expected[i]) > 1e-9) ok = false;
    }
    if (!ok)
        os << " | the fourth reference vector computes to 0.51 under Tr(rho^2) = (1+|S|^2)/2; "
              "the quoted 0.50 is not reproducible from the rounded vector";
    detail = os.str();
    return ok;
}

bool criterion_scan(std::string& detail) {
    Timer timer;
    holo::SiteLayout base;
    const auto layouts = holo::scan_grid(base, 2.0, 9, holo::ScanPlane::XY);
    const optics::CollectionOptics optics;
    const std::array<double, 3> truth{1.0, -0.5, 0.0}; // grid node (6, 3)
    const std::size_t truth_index = 3 * 9 + 6;
    int hits = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto res = mc::run_scan_simulation(layouts, optics, truth, 2000.0, 25.0, 30.0, 200,
                                                 0.5, 50000 + static_cast<std::uint64_t>(trial));
        if (holo::argmax_scan(res.totals).index == truth_index) ++hits;
    }

    const double fx = optics::fwhm(optics::sample_profile(optics, 0, 4.0, 1601));
    const double fy = optics::fwhm(optics::sample_profile(optics, 1, 4.0, 1601));
    const double fz = optics::fwhm(optics::sample_profile(optics, 2, 12.0, 1601));
    const double ratio = fz / (0.5 * (fx + fy));

    std::ostringstream os;
    os << hits << "/100 scans recovered the planted optimum (need >= 95); axial/transverse FWHM "
       << ratio << " (within [2.4, 3.6]), " << timer.seconds() << " s";
    detail = os.str();
    return hits >= 95 && ratio >= 2.4 && ratio <= 3.6;
}

bool criterion_wgs(std::string& detail) {
    Timer timer;
    holo::SiteLayout l;
    l.r_ref_um = {-33.75, 0.0, 0.0};
    l.delta_r_um = {7.5, 0.0, 0.0};
    l.n_sites = 10;
    std::vector<std::array<double, 2>> targets;
    for (const auto& p : holo::target_positions(l)) targets.push_back({p[0], p[1]});

    const auto result = holo::wgs_synthesize(targets, 512, 0.5, 50, 424242);
    const auto oracle = holo::propagate_oracle(result.mask, targets);
    const double elapsed = timer.seconds();

    std::ostringstream os;
    os << "oracle uniformity " << oracle.uniformity << " (>= 0.90), efficiency "
       << oracle.efficiency << ", " << elapsed << " s (< 10)";
    detail = os.str();
    return oracle.uniformity >= 0.90 && elapsed < 10.0;
}

bool criterion_planner(std::string& detail) {
    const long cap = planner::spatial_capacity(1500.0, 7.5);
    const double shuttle = planner::shuttle_time_us(5.0, 0.3);

    bool monotone = true;
    long prev = -1;
    for (double l = 5.0; l <= 5000.0; l *= 1.4) {
        const long n = planner::time_mux_limit(l, 20.0);
        if (n < prev) monotone = false;
        prev = n;
    }
    long prev_tau = planner::time_mux_limit(700.0, 0.5);
    for (double tau = 0.5; tau <= 300.0; tau *= 1.3) {
        const long n = planner::time_mux_limit(700.0, tau);
        if (n > prev_tau) monotone = false;
        prev_tau = n;
    }
    bool consistent = true;
    for (const long q : {17L, 600L, 6000L})
        for (const double tau : {8.0, 20.0})
            if (planner::time_mux_limit(planner::crossover_distance_km(q, tau), tau) != q)
                consistent = false;

    const auto report = planner::report(planner::LinkParams{});
    const bool footnotes =
        report.find("floor(5*55/20) = 13 modes at tau = 20 us (exact 13.75)") !=
            std::string::npos &&
        report.find("30 modes would require tau = 9.17 us") != std::string::npos &&
        report.find("6000*20/5 = 24000 km at tau = 20 us") != std::string::npos &&
        report.find("would require tau = 8.33 us") != std::string::npos;

    std::ostringstream os;
    os << "spatial_capacity " << cap << " (== 200), shuttle " << shuttle
       << " us (16.67 +- 0.01), monotone " << monotone << ", crossover-consistent " << consistent
       << ", footnotes " << footnotes;
    detail = os.str();
    return cap == 200 && std::fabs(shuttle - 16.67) <= 0.01 && monotone && consistent && footnotes;
}

bool criterion_determinism(std::string& detail) {
    namespace fs = std::filesystem;
    const auto base = fs::temp_directory_path() / "atomlink_acceptance_det";
    fs::remove_all(base);
    const auto sc = harness::Scenario::parse_text(
        "mode = fluorescence\nseed = 90210\n[run]\nsequences = 150\n");
    const auto a = harness::run(sc, (base / "a").string());
    const auto b = harness::run(sc, (base / "b").string());
    bool ok = a.outputs.size() == b.outputs.size();
    if (ok)
        for (std::size_t i = 0; i < a.outputs.size(); ++i)
            if (a.outputs[i].name != b.outputs[i].name ||
                a.outputs[i].digest != b.outputs[i].digest)
                ok = false;
    const bool verified = harness::verify_manifest(a, (base / "a").string());
    fs::remove_all(base);

    std::ostringstream os;
    os << (ok ? "identical" : "DIFFERENT") << " digests across reruns over " << a.outputs.size()
       << " output files; manifest re-verification " << (verified ? "ok" : "failed");
    detail = os.str();
    return ok && verified;
}

struct Criterion {
    int id;
    const char* title;
    std::function<bool(std::string&)> run;
};

const std::vector<Criterion> kCriteria = {
    {1, "excitation efficiency at the reference drive", criterion_excitation_efficiency},
    {2, "free-decay analytic oracle", criterion_free_decay},
    {3, "profile-fit round trip under Poisson noise", criterion_fit_round_trip},
    {4, "detection-table reproduction at 6e4 attempts/channel", criterion_table_reproduction},
    {5, "crosstalk floor and injected-crosstalk recovery", criterion_crosstalk},
    {6, "net-coupling back-out against the reference table", criterion_net_coupling},
    {7, "correlation fringes: ideal, linear, imperfection budget", criterion_fringes},
    {8, "purity formula on the four measured Stokes vectors", criterion_purity},
    {9, "scan optimization recovery and coupling FWHM ratio", criterion_scan},
    {10, "ten-spot hologram uniformity via the independent oracle", criterion_wgs},
    {11, "multiplexing planner values, properties and footnotes", criterion_planner},
    {12, "end-to-end determinism of a seeded pipeline", criterion_determinism},
};

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);

    int failures = 0, ran = 0;
    for (const auto& c : kCriteria) {
        if (only != 0 && c.id != only) continue;
        ++ran;
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("criterion %2d [%s] %s: %s\n", c.id, ok ? "PASS" : "FAIL", c.title,
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (ran == 0) {
        std::fprintf(stderr, "unknown criterion %d\n", only);
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
