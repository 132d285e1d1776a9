#include "atomlink/harness.hpp"

#include "atomlink/analysis.hpp"
#include "atomlink/coupling.hpp"
#include "atomlink/holo.hpp"
#include "atomlink/mc.hpp"
#include "atomlink/planner.hpp"
#include "atomlink/quantum.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace atomlink::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {
constexpr double kPi = std::numbers::pi;

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::uint64_t fnv1a(const char* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// tracks files written by a pipeline so failures can clean up and the
// manifest can list digests
class OutputSet {
public:
    explicit OutputSet(std::string dir) : dir_(std::move(dir)) {
        fs::create_directories(dir_);
    }

    std::string path(const std::string& name) {
        names_.push_back(name);
        return (fs::path(dir_) / name).string();
    }

    void discard_all() {
        for (const auto& n : names_) {
            std::error_code ec;
            fs::remove(fs::path(dir_) / n, ec);
        }
    }

    std::vector<OutputFile> digests() const {
        std::vector<OutputFile> out;
        for (const auto& n : names_) {
            const std::string p = (fs::path(dir_) / n).string();
            OutputFile f;
            f.name = n;
            f.digest = file_digest(p);
            f.bytes = static_cast<std::uint64_t>(fs::file_size(p));
            out.push_back(std::move(f));
        }
        return out;
    }

private:
    std::string dir_;
    std::vector<std::string> names_;
};

mc::ChannelChain chain_from(const Scenario& sc) {
    mc::ChannelChain chain;
    chain.p_init = sc.get_double("chain", "p_init", chain.p_init);
    chain.eta_ext = sc.get_double("chain", "eta_ext", chain.eta_ext);
    chain.eta_net = sc.get_doubles("chain", "eta_net", chain.eta_net);
    chain.eta_fiber = sc.get_double("chain", "eta_fiber", chain.eta_fiber);
    chain.eta_det = sc.get_double("chain", "eta_det", chain.eta_det);
    chain.background_rate_hz =
        sc.get_doubles("chain", "background_rate_hz", chain.background_rate_hz);
    chain.detection_window_ns =
        sc.get_double("chain", "detection_window_ns", chain.detection_window_ns);
    try {
        chain.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("[chain]: ") + e.what());
    }
    return chain;
}

mc::SequenceConfig sequence_from(const Scenario& sc, std::uint64_t seed) {
    mc::SequenceConfig cfg;
    cfg.n_sites = static_cast<int>(sc.get_long("sequence", "n_sites", cfg.n_sites));
    cfg.loading_probability =
        sc.get_double("sequence", "loading_probability", cfg.loading_probability);
    cfg.trials_per_cycle =
        static_cast<int>(sc.get_long("sequence", "trials_per_cycle", cfg.trials_per_cycle));
    cfg.atom_measurement_exposure_ms =
        sc.get_double("sequence", "atom_measurement_exposure_ms", cfg.atom_measurement_exposure_ms);
    // pipelines default to 12 us slots so the [1 us, 11 us] background
    // estimation window fits inside every trial
    cfg.detection_slot_us = sc.get_double("sequence", "detection_slot_us", 12.0);
    cfg.heating_loss_per_run =
        sc.get_double("sequence", "heating_loss_per_run", cfg.heating_loss_per_run);
    cfg.pushout_error = sc.get_double("sequence", "pushout_error", cfg.pushout_error);
    cfg.pushout_repeats =
        static_cast<int>(sc.get_long("sequence", "pushout_repeats", cfg.pushout_repeats));
    cfg.rng_seed = seed;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("[sequence]: ") + e.what());
    }
    return cfg;
}

optics::CollectionOptics optics_from(const Scenario& sc) {
    optics::CollectionOptics o;
    o.numerical_aperture = sc.get_double("optics", "numerical_aperture", o.numerical_aperture);
    o.magnification = sc.get_double("optics", "magnification", o.magnification);
    o.mfd_x_um = sc.get_double("optics", "mfd_x_um", o.mfd_x_um);
    o.mfd_y_um = sc.get_double("optics", "mfd_y_um", o.mfd_y_um);
    o.waveguide_pitch_um = sc.get_double("optics", "waveguide_pitch_um", o.waveguide_pitch_um);
    o.wavelength_um = sc.get_double("optics", "wavelength_um", o.wavelength_um);
    o.eta0 = sc.get_double("optics", "eta0", o.eta0);
    try {
        o.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("[optics]: ") + e.what());
    }
    return o;
}

holo::SiteLayout layout_from(const Scenario& sc) {
    holo::SiteLayout l;
    const auto rref = sc.get_doubles("layout", "r_ref_um", {0.0, 0.0, 0.0});
    const auto dr = sc.get_doubles("layout", "delta_r_um", {7.5, 0.0, 0.0});
    if (rref.size() != 3) throw ScenarioError("[layout].r_ref_um: expected 3 components");
    if (dr.size() != 3) throw ScenarioError("[layout].delta_r_um: expected 3 components");
    std::copy(rref.begin(), rref.end(), l.r_ref_um.begin());
    std::copy(dr.begin(), dr.end(), l.delta_r_um.begin());
    l.n_sites = static_cast<int>(sc.get_long("layout", "n_sites", l.n_sites));
    try {
        l.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("[layout]: ") + e.what());
    }
    return l;
}

mc::EmissionSampler emission_from(const Scenario& sc) {
    ReferenceExcitation ref;
    ref.fwhm_ns = sc.get_double("pulse", "fwhm_ns", ref.fwhm_ns);
    ref.rise_time_ns = sc.get_double("pulse", "rise_time_ns", ref.rise_time_ns);
    ref.peak_omega = bloch::mhz_to_rad_per_ns(sc.get_double("pulse", "peak_mhz", 21.55));
    ref.detuning = bloch::mhz_to_rad_per_ns(sc.get_double("pulse", "detuning_mhz", -0.38));
    ref.dephasing = bloch::mhz_to_rad_per_ns(sc.get_double("pulse", "dephasing_mhz", 2.87));
    ref.t0_ns = sc.get_double("pulse", "t0_ns", ref.t0_ns);
    ref.bin_ns = sc.get_double("pulse", "bin_ns", ref.bin_ns);
    ref.horizon_ns = sc.get_double("pulse", "horizon_ns", ref.horizon_ns);
    return mc::EmissionSampler(reference_emission_profile(ref), ref.bin_ns);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
}

// ---------------------------------------------------------------- pipelines

void run_fluorescence(const Scenario& sc, std::uint64_t seed, int threads, OutputSet& out) {
    const auto chain = chain_from(sc);
    const auto cfg = sequence_from(sc, seed);
    const auto sampler = emission_from(sc);
    const long sequences = sc.get_long("run", "sequences", 1500);
    if (sequences < 1) throw ScenarioError("[run].sequences: must be >= 1");

    const auto run = mc::run_fluorescence_sequences(cfg, chain, sampler, sequences, seed,
                                                    nullptr, threads);
    mc::write_records(out.path("records.txt"), run.records);

    {
        std::ostringstream os;
        os << "# atomlink-presence v1\n";
        for (const auto& seq : run.presence) {
            for (std::size_t i = 0; i < seq.size(); ++i) os << (i ? " " : "") << int(seq[i]);
            os << "\n";
        }
        write_text(out.path("presence.txt"), os.str());
    }

    const auto probs = analysis::conditional_probs(run.records, run.presence,
                                                   cfg.trials_per_cycle,
                                                   chain.detection_window_ns);
    const auto bg = analysis::background_rate(run.records, 0.0, chain.n_channels(),
                                              sequences * cfg.trials_per_cycle,
                                              cfg.detection_slot_us * 1e3);

    const int n = chain.n_channels();
    std::vector<std::string> cols;
    for (int i = 0; i < n; ++i) cols.push_back("ch" + std::to_string(i + 1));
    std::vector<std::vector<double>> rows(5, std::vector<double>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i) {
        const auto& pa = probs.given_present[static_cast<std::size_t>(i)];
        const auto& pn = probs.given_absent[static_cast<std::size_t>(i)];
        rows[0][static_cast<std::size_t>(i)] = pa.p * 1e3;
        rows[1][static_cast<std::size_t>(i)] =
            100.0 * analysis::infer_net_coupling(pa.p, chain.p_init, chain.eta_ext,
                                                 chain.eta_fiber, chain.eta_det);
        rows[2][static_cast<std::size_t>(i)] = pn.p * 1e6;
        rows[3][static_cast<std::size_t>(i)] = pa.p > 0.0 ? pn.p / pa.p : 0.0;
        rows[4][static_cast<std::size_t>(i)] = bg[static_cast<std::size_t>(i)];
    }
    write_table_csv(out.path("table.csv"),
                    {"P(p_i|a_i) x1e3", "eta_net_percent", "P(p_i|~a_i) x1e6",
                     "P(p_i|~a_i)/P(p_i|a_i)", "background_hz"},
                    cols, rows);
}

void run_scan(const Scenario& sc, std::uint64_t seed, OutputSet& out) {
    const auto base = layout_from(sc);
    const auto opt = optics_from(sc);
    const int steps = static_cast<int>(sc.get_long("scan", "steps", 9));
    const double extent = sc.get_double("scan", "extent_um", 2.0);
    const std::string plane_s = sc.get_string("scan", "plane", "xy");
    const auto plane = plane_s == "z" ? holo::ScanPlane::Z : holo::ScanPlane::XY;
    if (plane_s != "z" && plane_s != "xy")
        throw ScenarioError("[scan].plane: expected 'xy' or 'z'");
    const int trials = static_cast<int>(sc.get_long("scan", "trials", 200));
    const double exposure = sc.get_double("scan", "exposure_ms", 30.0);
    const double rate = sc.get_double("scan", "rate_hz", 2000.0);
    const double bg = sc.get_double("scan", "background_hz", 25.0);
    const double loading = sc.get_double("sequence", "loading_probability", 0.5);

    const auto layouts = holo::scan_grid(base, extent, steps, plane);
    const auto result = mc::run_scan_simulation(layouts, opt, base.r_ref_um, rate, bg, exposure,
                                                trials, loading, seed);

    for (std::size_t li = 0; li < layouts.size(); ++li) {
        const auto hist = analysis::histogram(result.counts[li], 1.0);
        std::ostringstream os;
        char buf[128];
        std::snprintf(buf, sizeof buf, "# layout %03zu r_ref_um = %.4f %.4f %.4f\n", li,
                      layouts[li].r_ref_um[0], layouts[li].r_ref_um[1], layouts[li].r_ref_um[2]);
        os << buf << "# count frequency\n";
        for (std::size_t b = 0; b < hist.counts.size(); ++b) {
            if (hist.counts[b] == 0) continue;
            os << static_cast<long>(hist.origin + static_cast<double>(b) * hist.bin_width) << " "
               << hist.counts[b] << "\n";
        }
        std::snprintf(buf, sizeof buf, "hist_%03zu.txt", li);
        write_text(out.path(buf), os.str());
    }

    const auto best = holo::argmax_scan(result.totals);
    std::ostringstream os;
    os << "# scan totals, " << (plane == holo::ScanPlane::XY ? "xy" : "z") << " plane, steps="
       << steps << " extent_um=" << extent << "\n";
    os << "# argmax index " << best.index << " total " << best.value << "\n";
    if (plane == holo::ScanPlane::XY) {
        for (int iy = 0; iy < steps; ++iy) {
            for (int ix = 0; ix < steps; ++ix) {
                if (ix) os << " ";
                os << result.totals[static_cast<std::size_t>(iy * steps + ix)];
            }
            os << "\n";
        }
    } else {
        for (int i = 0; i < steps; ++i) os << result.totals[static_cast<std::size_t>(i)] << "\n";
    }
    write_text(out.path("map.txt"), os.str());
}

void run_entanglement(const Scenario& sc, std::uint64_t seed, OutputSet& out) {
    const auto chain = chain_from(sc);
    auto cfg = sequence_from(sc, seed);
    cfg.trials_per_cycle = std::min(cfg.trials_per_cycle, 30);
    const auto sampler = emission_from(sc);

    const std::string basis_s = sc.get_string("entanglement", "basis", "circular");
    if (basis_s != "circular" && basis_s != "linear")
        throw ScenarioError("[entanglement].basis: expected 'circular' or 'linear'");
    const auto basis =
        basis_s == "linear" ? quantum::BasisKind::Linear : quantum::BasisKind::Circular;
    const long n_angles = sc.get_long("entanglement", "n_angles", 12);
    const double span = sc.get_double("entanglement", "angle_span", kPi);
    const long per_angle = sc.get_long("entanglement", "sequences_per_angle", 20000);
    const int channel = static_cast<int>(sc.get_long("entanglement", "channel", 0));
    if (n_angles < 4) throw ScenarioError("[entanglement].n_angles: need >= 4");
    if (channel < 0 || channel >= chain.n_channels())
        throw ScenarioError("[entanglement].channel: outside the chain");

    mc::Imperfections imp;
    imp.tilt_rad = sc.get_double("imperfections", "tilt_rad", 0.0);
    imp.depolarize_on_init_failure =
        sc.get_bool("imperfections", "depolarize_on_init_failure", false);
    imp.zeeman_splitting_mhz = sc.get_double("imperfections", "zeeman_splitting_mhz", 0.0);
    imp.precession_time_us = sc.get_double("imperfections", "precession_time_us", 0.0);

    std::vector<double> angles;
    for (long i = 0; i < n_angles; ++i)
        angles.push_back(span * static_cast<double>(i) / static_cast<double>(n_angles));

    const auto sweep = mc::run_entanglement_sweep(cfg, chain, basis, angles, imp, sampler,
                                                  channel, per_angle, seed);

    std::vector<double> ang, ch_h, sv_h, p_h, ch_v, sv_v, p_v;
    std::vector<long> succ_h, tr_h;
    for (const auto& pt : sweep) {
        ang.push_back(pt.angle);
        ch_h.push_back(static_cast<double>(pt.clicked_h));
        sv_h.push_back(static_cast<double>(pt.survived_h));
        p_h.push_back(pt.clicked_h ? static_cast<double>(pt.survived_h) / pt.clicked_h : 0.0);
        ch_v.push_back(static_cast<double>(pt.clicked_v));
        sv_v.push_back(static_cast<double>(pt.survived_v));
        p_v.push_back(pt.clicked_v ? static_cast<double>(pt.survived_v) / pt.clicked_v : 0.0);
        succ_h.push_back(pt.survived_h);
        tr_h.push_back(pt.clicked_h);
    }
    write_plotdata(out.path("fringe.txt"),
                   {"angle_rad", "clicked_h", "survived_h", "p_survival_h", "clicked_v",
                    "survived_v", "p_survival_v"},
                   {ang, ch_h, sv_h, p_h, ch_v, sv_v, p_v});

    const auto fit = analysis::fit_fringe(ang, succ_h, tr_h, quantum::hwp_angle_scale);
    if (!fit.converged) throw NonConvergenceError("fringe fit: " + fit.diagnostic);

    std::ostringstream os;
    char buf[160];
    os << "# fringe fit: A sin(scale*theta + B) + C on the H-port survival\n";
    std::snprintf(buf, sizeof buf, "angle_scale = %.1f\n", quantum::hwp_angle_scale);
    os << buf;
    std::snprintf(buf, sizeof buf, "A = %.6f +- %.6f\n", fit.a, fit.se_a);
    os << buf;
    std::snprintf(buf, sizeof buf, "B = %.6f +- %.6f\n", fit.b, fit.se_b);
    os << buf;
    std::snprintf(buf, sizeof buf, "C = %.6f +- %.6f\n", fit.c, fit.se_c);
    os << buf;
    std::snprintf(buf, sizeof buf, "visibility_a_over_c = %.6f\n", fit.visibility);
    os << buf;
    std::snprintf(buf, sizeof buf, "visibility_two_a = %.6f\n", fit.visibility_two_a);
    os << buf;
    std::snprintf(buf, sizeof buf, "residual_rms = %.6g\n", fit.residual_rms);
    os << buf;
    write_text(out.path("fit.txt"), os.str());
}

void run_wgs(const Scenario& sc, std::uint64_t seed, OutputSet& out) {
    const auto base = layout_from(sc);
    const auto grid_n = static_cast<std::size_t>(sc.get_long("wgs", "grid_n", 512));
    const double pitch = sc.get_double("wgs", "pitch_um", 0.5);
    const int iterations = static_cast<int>(sc.get_long("wgs", "iterations", 50));

    std::vector<std::array<double, 2>> targets;
    for (const auto& p : holo::target_positions(base)) targets.push_back({p[0], p[1]});

    holo::WgsResult result;
    try {
        result = holo::wgs_synthesize(targets, grid_n, pitch, iterations, seed);
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("[wgs]: ") + e.what());
    }
    holo::save_mask_binary(result.mask, out.path("mask.bin"));

    const auto oracle = holo::propagate_oracle(result.mask, targets);
    std::ostringstream os;
    os << "uniformity = " << result.metrics.uniformity << "\n";
    os << "uniformity_oracle = " << oracle.uniformity << "\n";
    os << "efficiency = " << result.metrics.efficiency << "\n";
    os << "spots =";
    for (double v : result.metrics.intensities) os << " " << v;
    os << "\n";
    write_text(out.path("metrics.txt"), os.str());
}

void run_plan(const Scenario& sc, OutputSet& out) {
    planner::LinkParams p;
    p.distance_km = sc.get_double("plan", "distance_km", p.distance_km);
    p.attempt_period_us = sc.get_double("plan", "attempt_period_us", p.attempt_period_us);
    p.shuttle_spacing_um = sc.get_double("plan", "shuttle_spacing_um", p.shuttle_spacing_um);
    p.shuttle_speed_um_per_us =
        sc.get_double("plan", "shuttle_speed_um_per_us", p.shuttle_speed_um_per_us);
    p.fov_um = sc.get_double("plan", "fov_um", p.fov_um);
    p.site_spacing_um = sc.get_double("plan", "site_spacing_um", p.site_spacing_um);
    p.available_qubits = sc.get_long("plan", "available_qubits", p.available_qubits);
    p.success_prob_per_attempt =
        sc.get_double("plan", "success_prob_per_attempt", p.success_prob_per_attempt);
    p.duration_ms = sc.get_double("plan", "duration_ms", p.duration_ms);
    try {
        write_text(out.path("report.txt"), planner::report(p));
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("[plan]: ") + e.what());
    }
}

void run_fit_bloch(const Scenario& sc, OutputSet& out) {
    const std::string input = sc.get_string("fit", "input_file", "");
    if (input.empty()) throw ScenarioError("[fit].input_file: required for fit-bloch");
    const double bin_ns = sc.get_double("fit", "bin_ns", 1.0);
    const std::string kind_s = sc.get_string("fit", "kind", "smoothed_square");
    const double rise = sc.get_double("fit", "rise_time_ns", 40.0);
    const auto kind = kind_s == "gaussian" ? bloch::PulseKind::Gaussian
                                           : bloch::PulseKind::SmoothedSquare;

    std::ifstream in(input);
    if (!in) throw ScenarioError("[fit].input_file: cannot open " + input);
    std::vector<double> observed;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        double t, v;
        if (ls >> t >> v) observed.push_back(v);
    }
    if (observed.empty()) throw ScenarioError("[fit].input_file: no samples in " + input);

    bloch::ProfileFit fit;
    try {
        fit = bloch::fit_profile(observed, bin_ns, kind, rise);
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("[fit]: ") + e.what());
    }
    if (!fit.converged) throw NonConvergenceError("profile fit: " + fit.diagnostic);

    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "fwhm_ns = %.6f +- %.6f\n", fit.fwhm_ns, fit.se_fwhm);
    os << buf;
    std::snprintf(buf, sizeof buf, "peak_omega_rad_per_ns = %.6f +- %.6f\n", fit.peak_omega,
                  fit.se_omega);
    os << buf;
    std::snprintf(buf, sizeof buf, "peak_mhz = %.4f\n", fit.peak_omega / (2.0 * kPi) * 1e3);
    os << buf;
    std::snprintf(buf, sizeof buf, "detuning_rad_per_ns = %.6f +- %.6f\n", fit.detuning,
                  fit.se_detuning);
    os << buf;
    std::snprintf(buf, sizeof buf, "dephasing_rad_per_ns = %.6f +- %.6f\n", fit.dephasing,
                  fit.se_dephasing);
    os << buf;
    std::snprintf(buf, sizeof buf, "t0_ns = %.4f +- %.4f\n", fit.t0_ns, fit.se_t0);
    os << buf;
    std::snprintf(buf, sizeof buf, "cost = %.6g  iterations = %d\n", fit.cost, fit.iterations);
    os << buf;
    write_text(out.path("fit.txt"), os.str());
}

void run_fit_fringe(const Scenario& sc, OutputSet& out) {
    const std::string input = sc.get_string("fit", "input_file", "");
    if (input.empty()) throw ScenarioError("[fit].input_file: required for fit-fringe");
    const double scale = sc.get_double("fit", "angle_scale", 1.0);

    std::ifstream in(input);
    if (!in) throw ScenarioError("[fit].input_file: cannot open " + input);
    std::vector<double> angles;
    std::vector<long> succ, tri;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        double a;
        long s, t;
        if (ls >> a >> s >> t) {
            angles.push_back(a);
            succ.push_back(s);
            tri.push_back(t);
        }
    }
    if (angles.empty()) throw ScenarioError("[fit].input_file: no samples in " + input);

    analysis::FringeFit fit;
    try {
        fit = analysis::fit_fringe(angles, succ, tri, scale);
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("[fit]: ") + e.what());
    }
    if (!fit.converged) throw NonConvergenceError("fringe fit: " + fit.diagnostic);

    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "A = %.6f +- %.6f\n", fit.a, fit.se_a);
    os << buf;
    std::snprintf(buf, sizeof buf, "B = %.6f +- %.6f\n", fit.b, fit.se_b);
    os << buf;
    std::snprintf(buf, sizeof buf, "C = %.6f +- %.6f\n", fit.c, fit.se_c);
    os << buf;
    std::snprintf(buf, sizeof buf, "visibility_a_over_c = %.6f\n", fit.visibility);
    os << buf;
    std::snprintf(buf, sizeof buf, "visibility_two_a = %.6f\n", fit.visibility_two_a);
    os << buf;
    write_text(out.path("fit.txt"), os.str());
}

} // namespace

std::vector<double> reference_emission_profile(const ReferenceExcitation& ref) {
    bloch::PulseSpec spec;
    spec.kind = bloch::PulseKind::SmoothedSquare;
    spec.fwhm_ns = ref.fwhm_ns;
    spec.rise_time_ns = ref.rise_time_ns;
    spec.peak_omega = ref.peak_omega;
    spec.center_ns = ref.t0_ns;

    bloch::TwoLevelParams params;
    params.rabi_envelope = bloch::pulse_envelope(spec);
    params.detuning = ref.detuning;
    params.dephasing = ref.dephasing;

    const double fastest = std::max({params.decay, ref.peak_omega, std::fabs(ref.detuning)});
    const double dt = std::min(0.05, 0.09 / fastest);
    const auto traj =
        bloch::integrate(params, bloch::BlochState{}, {0.0, ref.horizon_ns + ref.bin_ns}, dt);
    return bloch::emission_profile(traj, ref.bin_ns, ref.horizon_ns);
}

void write_table_csv(const std::string& path, const std::vector<std::string>& row_labels,
                     const std::vector<std::string>& col_labels,
                     const std::vector<std::vector<double>>& rows) {
    if (rows.size() != row_labels.size())
        throw std::invalid_argument("write_table_csv: label/row mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << "row";
    for (const auto& c : col_labels) out << "," << c;
    out << "\n";
    char buf[64];
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << row_labels[r];
        for (double v : rows[r]) {
            std::snprintf(buf, sizeof buf, "%.6g", v);
            out << "," << buf;
        }
        out << "\n";
    }
}

void write_plotdata(const std::string& path, const std::vector<std::string>& col_names,
                    const std::vector<std::vector<double>>& columns) {
    if (columns.size() != col_names.size())
        throw std::invalid_argument("write_plotdata: name/column mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << "#";
    for (const auto& n : col_names) out << " " << n;
    out << "\n";
    const std::size_t nrow = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns)
        if (c.size() != nrow) throw std::invalid_argument("write_plotdata: ragged columns");
    char buf[64];
    for (std::size_t r = 0; r < nrow; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.8g", columns[c][r]);
            out << (c ? " " : "") << buf;
        }
        out << "\n";
    }
}

std::string text_digest(const std::string& text) {
    return hex64(fnv1a(text.data(), text.size()));
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot digest missing file: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof buf);
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return hex64(h);
}

RunManifest run(const Scenario& scenario, const std::string& out_dir,
                std::optional<std::uint64_t> seed_override, int threads) {
    Scenario sc = scenario;
    if (seed_override) sc.set_seed(*seed_override);
    sc.validate();
    const std::uint64_t seed = sc.seed().value_or(0);

    RunManifest manifest;
    manifest.scenario_digest = text_digest(sc.canonical_text());
    manifest.tool_version = kToolVersion;
    manifest.seed = seed;
    manifest.started_at = now_iso8601();

    OutputSet out(out_dir);
    try {
        const auto& mode = sc.mode();
        if (mode == "fluorescence")
            run_fluorescence(sc, seed, threads, out);
        else if (mode == "scan")
            run_scan(sc, seed, out);
        else if (mode == "entanglement")
            run_entanglement(sc, seed, out);
        else if (mode == "wgs")
            run_wgs(sc, seed, out);
        else if (mode == "plan")
            run_plan(sc, out);
        else if (mode == "fit-bloch")
            run_fit_bloch(sc, out);
        else if (mode == "fit-fringe")
            run_fit_fringe(sc, out);
        else
            throw ScenarioError("mode: unknown mode '" + mode + "'");
    } catch (...) {
        out.discard_all();
        throw;
    }

    manifest.outputs = out.digests();
    manifest.finished_at = now_iso8601();

    json j;
    j["scenario_digest"] = manifest.scenario_digest;
    j["tool_version"] = manifest.tool_version;
    j["seed"] = manifest.seed;
    j["started_at"] = manifest.started_at;
    j["finished_at"] = manifest.finished_at;
    j["outputs"] = json::array();
    for (const auto& f : manifest.outputs)
        j["outputs"].push_back({{"name", f.name}, {"digest", f.digest}, {"bytes", f.bytes}});
    write_text((fs::path(out_dir) / "manifest.json").string(), j.dump(2) + "\n");
    return manifest;
}

bool verify_manifest(const RunManifest& manifest, const std::string& out_dir) {
    for (const auto& f : manifest.outputs) {
        const std::string p = (fs::path(out_dir) / f.name).string();
        try {
            if (file_digest(p) != f.digest) return false;
        } catch (const std::exception&) {
            return false;
        }
    }
    return true;
}

RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    json j;
    in >> j;
    RunManifest m;
    m.scenario_digest = j.at("scenario_digest").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    for (const auto& f : j.at("outputs")) {
        OutputFile of;
        of.name = f.at("name").get<std::string>();
        of.digest = f.at("digest").get<std::string>();
        of.bytes = f.at("bytes").get<std::uint64_t>();
        m.outputs.push_back(std::move(of));
    }
    return m;
}

} // namespace atomlink::harness
