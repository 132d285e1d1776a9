#include "atomlink/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace atomlink::mc {

double ChannelChain::click_probability(int channel) const {
    return p_init * eta_ext * eta_net.at(static_cast<std::size_t>(channel)) * eta_fiber * eta_det;
}

void ChannelChain::validate() const {
    auto check01 = [](double v, const char* what) {
        if (v < 0.0 || v > 1.0) throw std::invalid_argument(std::string("chain: ") + what + " outside [0,1]");
    };
    check01(p_init, "p_init");
    check01(eta_ext, "eta_ext");
    check01(eta_fiber, "eta_fiber");
    check01(eta_det, "eta_det");
    for (double v : eta_net) check01(v, "eta_net");
    for (double v : background_rate_hz)
        if (v < 0.0) throw std::invalid_argument("chain: negative background rate");
    if (eta_net.size() != background_rate_hz.size())
        throw std::invalid_argument("chain: eta_net and background sizes differ");
    if (detection_window_ns <= 0.0) throw std::invalid_argument("chain: window must be positive");
}

void SequenceConfig::validate() const {
    if (n_sites < 1) throw std::invalid_argument("config: n_sites must be >= 1");
    if (trials_per_cycle < 1) throw std::invalid_argument("config: trials_per_cycle must be >= 1");
    if (loading_probability < 0.0 || loading_probability > 1.0)
        throw std::invalid_argument("config: loading_probability outside [0,1]");
    if (heating_loss_per_run < 0.0 || heating_loss_per_run > 1.0)
        throw std::invalid_argument("config: heating_loss outside [0,1]");
    if (pushout_error < 0.0 || pushout_error > 1.0)
        throw std::invalid_argument("config: pushout_error outside [0,1]");
    if (pushout_repeats < 0) throw std::invalid_argument("config: pushout_repeats must be >= 0");
    if (detection_slot_us <= 0.0) throw std::invalid_argument("config: detection slot must be positive");
}

double emission_time_sample(const std::vector<double>& profile, double bin_ns, Rng& rng) {
    if (profile.empty()) throw std::invalid_argument("emission_time_sample: empty profile");
    double total = 0.0;
    for (double v : profile) total += v;
    if (total <= 0.0) throw std::invalid_argument("emission_time_sample: all-zero profile");

    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t k = profile.size() - 1;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        acc += profile[i];
        if (u < acc) {
            k = i;
            break;
        }
    }
    return (static_cast<double>(k) + rng.uniform()) * bin_ns;
}

EmissionSampler::EmissionSampler(std::vector<double> profile, double bin_ns)
    : profile_(std::move(profile)), bin_ns_(bin_ns) {
    if (profile_.empty()) throw std::invalid_argument("EmissionSampler: empty profile");
}

double EmissionSampler::sample(Rng& rng) const {
    return emission_time_sample(profile_, bin_ns_, rng);
}

EmissionSampler EmissionSampler::exponential_fallback(double lifetime_ns) {
    std::vector<double> bins(150);
    for (std::size_t i = 0; i < bins.size(); ++i)
        bins[i] = std::exp(-static_cast<double>(i) / lifetime_ns);
    return EmissionSampler(std::move(bins), 1.0);
}

std::optional<DetectionRecord> sample_detection(const ChannelChain& chain, int channel,
                                                bool atom_present, const EmissionSampler& emission,
                                                double slot_ns, Rng& rng) {
    std::optional<double> atom_t, bg_t;
    if (atom_present && rng.bernoulli(chain.click_probability(channel)))
        atom_t = emission.sample(rng);

    const double bg_p =
        chain.background_rate_hz.at(static_cast<std::size_t>(channel)) * slot_ns * 1e-9;
    if (rng.bernoulli(bg_p)) bg_t = rng.uniform(0.0, slot_ns);

    if (!atom_t && !bg_t) return std::nullopt;

    DetectionRecord rec;
    rec.channel = channel;
    rec.port = DetectorPort::Unsplit;
    if (atom_t && (!bg_t || *atom_t <= *bg_t)) {
        rec.timestamp_ns = *atom_t;
        rec.origin = ClickOrigin::Atom;
    } else {
        rec.timestamp_ns = *bg_t;
        rec.origin = ClickOrigin::Background;
    }
    return rec;
}

namespace {

void run_fluorescence_chunk(const SequenceConfig& config, const ChannelChain& chain,
                            const EmissionSampler& emission, std::int64_t seq_begin,
                            std::int64_t seq_end, std::uint64_t master_seed,
                            const CrosstalkInjection* injection, FluorescenceRun& out) {
    const double slot_ns = config.detection_slot_us * 1e3;
    const int n_ch = chain.n_channels();
    for (std::int64_t seq = seq_begin; seq < seq_end; ++seq) {
        Rng rng(master_seed, "sequence/" + std::to_string(seq));
        std::vector<std::uint8_t> loaded(static_cast<std::size_t>(config.n_sites));
        for (auto& s : loaded) s = rng.bernoulli(config.loading_probability) ? 1 : 0;

        for (int trial = 0; trial < config.trials_per_cycle; ++trial) {
            for (int ch = 0; ch < n_ch; ++ch) {
                const bool present = ch < config.n_sites && loaded[static_cast<std::size_t>(ch)];
                auto rec = sample_detection(chain, ch, present, emission, slot_ns, rng);

                if (injection && injection->channel == ch && !present &&
                    injection->source_site >= 0 && injection->source_site < config.n_sites &&
                    loaded[static_cast<std::size_t>(injection->source_site)]) {
                    if (rng.bernoulli(injection->ratio * chain.click_probability(ch))) {
                        const double t = emission.sample(rng);
                        if (!rec || t < rec->timestamp_ns) {
                            DetectionRecord r;
                            r.channel = ch;
                            r.timestamp_ns = t;
                            r.origin = ClickOrigin::Atom;
                            rec = r;
                        }
                    }
                }

                if (rec) {
                    rec->sequence_id = seq;
                    rec->trial_id = trial;
                    out.records.push_back(*rec);
                }
            }
        }
        out.presence.push_back(std::move(loaded));
    }
}

} // namespace

FluorescenceRun run_fluorescence_sequences(const SequenceConfig& config, const ChannelChain& chain,
                                           const EmissionSampler& emission,
                                           std::int64_t n_sequences, std::uint64_t master_seed,
                                           const CrosstalkInjection* injection, int threads) {
    config.validate();
    chain.validate();
    if (n_sequences < 0) throw std::invalid_argument("n_sequences must be >= 0");
    threads = std::max(1, threads);

    if (threads == 1 || n_sequences < 2 * threads) {
        FluorescenceRun run;
        run_fluorescence_chunk(config, chain, emission, 0, n_sequences, master_seed, injection, run);
        return run;
    }

    std::vector<FluorescenceRun> parts(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    const std::int64_t per = (n_sequences + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::int64_t lo = t * per;
        const std::int64_t hi = std::min<std::int64_t>(n_sequences, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([&, t, lo, hi] {
            run_fluorescence_chunk(config, chain, emission, lo, hi, master_seed, injection,
                                   parts[static_cast<std::size_t>(t)]);
        });
    }
    for (auto& th : pool) th.join();

    FluorescenceRun run;
    for (auto& p : parts) {
        run.records.insert(run.records.end(), p.records.begin(), p.records.end());
        run.presence.insert(run.presence.end(), p.presence.begin(), p.presence.end());
    }
    return run;
}

ScanResult run_scan_simulation(const std::vector<holo::SiteLayout>& layouts,
                               const optics::CollectionOptics& optics,
                               const std::array<double, 3>& optimum_r_ref,
                               double fluorescence_rate_hz, double background_rate_hz,
                               double exposure_ms, int trials_per_layout,
                               double loading_probability, std::uint64_t master_seed) {
    if (fluorescence_rate_hz < 0.0) throw std::invalid_argument("scan: rate must be >= 0");
    if (layouts.empty()) throw std::invalid_argument("scan: no layouts");

    const double exposure_s = exposure_ms * 1e-3;
    ScanResult out;
    out.counts.reserve(layouts.size());
    out.totals.reserve(layouts.size());
    for (std::size_t li = 0; li < layouts.size(); ++li) {
        Rng rng(master_seed, "scan/layout/" + std::to_string(li));
        const std::array<double, 3> d{layouts[li].r_ref_um[0] - optimum_r_ref[0],
                                      layouts[li].r_ref_um[1] - optimum_r_ref[1],
                                      layouts[li].r_ref_um[2] - optimum_r_ref[2]};
        const double rel = coupling_efficiency(d, optics) / optics.eta0;
        const double loaded_mean = fluorescence_rate_hz * exposure_s * rel +
                                   background_rate_hz * exposure_s;
        const double empty_mean = background_rate_hz * exposure_s;

        std::vector<long> counts(static_cast<std::size_t>(trials_per_layout));
        double total = 0.0;
        for (auto& c : counts) {
            const bool loaded = rng.bernoulli(loading_probability);
            c = rng.poisson(loaded ? loaded_mean : empty_mean);
            total += static_cast<double>(c);
        }
        out.counts.push_back(std::move(counts));
        out.totals.push_back(total);
    }
    return out;
}

quantum::JointAtomPhotonState entangled_state(const Imperfections& imp) {
    using quantum::complexd;
    // (|+1>|s~-> + |-1>|s~+>)/sqrt(2) with s~+- = (|H> +- i eps |V>)/sqrt(1+eps^2);
    // in the exact circular basis s~+- mixes as (1 +- eps)|s+-> + (1 -+ eps)|s-+>
    const double eps = quantum::tilt_ellipticity(imp.tilt_rad);
    const double denom = 2.0 * std::sqrt(1.0 + eps * eps);
    const double hi = (1.0 + eps) / denom;
    const double lo = (1.0 - eps) / denom;
    quantum::JointAtomPhotonState st;
    st.amp = {complexd{hi, 0.0}, complexd{lo, 0.0}, complexd{lo, 0.0}, complexd{hi, 0.0}};
    st.zeeman_splitting_mhz = imp.zeeman_splitting_mhz;
    st.elapsed_time_us = imp.precession_time_us;
    return st;
}

EntanglementRun run_entanglement_sequences(const SequenceConfig& config, const ChannelChain& chain,
                                           quantum::BasisKind basis, double analyzer_angle,
                                           const Imperfections& imp,
                                           const EmissionSampler& emission, int channel,
                                           std::int64_t n_sequences, std::uint64_t master_seed,
                                           const std::string& stream_tag) {
    config.validate();
    chain.validate();

    const int max_trials = std::min(config.trials_per_cycle, 30);
    const double p_emit_click = chain.eta_ext *
                                chain.eta_net.at(static_cast<std::size_t>(channel)) *
                                chain.eta_fiber * chain.eta_det;
    // the herald gates on the detection window, so only background inside it
    // can trigger a projection
    const double window_ns = chain.detection_window_ns;
    const double bg_p =
        chain.background_rate_hz.at(static_cast<std::size_t>(channel)) * window_ns * 1e-9;

    const auto [ket_a, ket_b] = quantum::analyzer_basis(analyzer_angle, basis);
    const auto joint = entangled_state(imp);
    double survival_scale = 1.0 - config.heating_loss_per_run;
    for (int r = 0; r < config.pushout_repeats; ++r) survival_scale *= 1.0 - config.pushout_error;

    EntanglementRun out;
    for (std::int64_t seq = 0; seq < n_sequences; ++seq) {
        Rng rng(master_seed, stream_tag + "/" + std::to_string(seq));
        for (int trial = 0; trial < max_trials; ++trial) {
            const bool init_ok = rng.bernoulli(chain.p_init);
            const bool can_emit = init_ok || imp.depolarize_on_init_failure;

            std::optional<double> atom_t, bg_t;
            if (can_emit && rng.bernoulli(p_emit_click)) atom_t = emission.sample(rng);
            if (rng.bernoulli(bg_p)) bg_t = rng.uniform(0.0, window_ns);
            if (!atom_t && !bg_t) continue;

            const bool atom_origin = atom_t && (!bg_t || *atom_t <= *bg_t);

            DetectorPort port;
            double survival_ideal;
            if (atom_origin && init_ok) {
                const auto proj_a = quantum::project_photon(joint, ket_a);
                // orthonormal pair: P(b) = 1 - P(a)
                if (rng.uniform() < proj_a.probability) {
                    port = DetectorPort::H;
                    survival_ideal = proj_a.post_atom ? std::norm(proj_a.post_atom->amp_minus) : 0.5;
                } else {
                    const auto proj_b = quantum::project_photon(joint, ket_b);
                    port = DetectorPort::V;
                    survival_ideal = proj_b.post_atom ? std::norm(proj_b.post_atom->amp_minus) : 0.5;
                }
            } else {
                // depolarized or background click: no atom correlation
                port = rng.bernoulli(0.5) ? DetectorPort::H : DetectorPort::V;
                survival_ideal = 0.5;
            }

            const bool survived = rng.bernoulli(survival_ideal * survival_scale);

            DetectionRecord rec;
            rec.sequence_id = seq;
            rec.trial_id = trial;
            rec.channel = channel;
            rec.port = port;
            rec.timestamp_ns = atom_origin ? *atom_t : *bg_t;
            rec.origin = atom_origin ? ClickOrigin::Atom : ClickOrigin::Background;
            out.records.push_back(rec);

            EntanglementOutcome oc;
            oc.sequence_id = seq;
            oc.trials_used = trial + 1;
            oc.analyzer_angle = analyzer_angle;
            oc.basis = basis;
            oc.port = port;
            oc.origin = rec.origin;
            oc.atom_survived = survived;
            out.outcomes.push_back(oc);
            break; // projection ends the sequence
        }
    }
    return out;
}

std::vector<FringePoint> run_entanglement_sweep(const SequenceConfig& config,
                                                const ChannelChain& chain,
                                                quantum::BasisKind basis,
                                                const std::vector<double>& angles,
                                                const Imperfections& imp,
                                                const EmissionSampler& emission, int channel,
                                                std::int64_t sequences_per_angle,
                                                std::uint64_t master_seed) {
    std::vector<FringePoint> out;
    out.reserve(angles.size());
    for (std::size_t ai = 0; ai < angles.size(); ++ai) {
        const auto run = run_entanglement_sequences(config, chain, basis, angles[ai], imp,
                                                    emission, channel, sequences_per_angle,
                                                    master_seed, "ent/a" + std::to_string(ai));
        FringePoint pt;
        pt.angle = angles[ai];
        for (const auto& oc : run.outcomes) {
            if (oc.port == DetectorPort::H) {
                ++pt.clicked_h;
                if (oc.atom_survived) ++pt.survived_h;
            } else {
                ++pt.clicked_v;
                if (oc.atom_survived) ++pt.survived_v;
            }
        }
        out.push_back(pt);
    }
    return out;
}

namespace {
const char* port_tag(DetectorPort p) {
    switch (p) {
    case DetectorPort::H: return "H";
    case DetectorPort::V: return "V";
    default: return "-";
    }
}
} // namespace

void write_records(const std::string& path, const std::vector<DetectionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write records: " + path);
    out << "# atomlink-records v1\n";
    out << "# sequence_id trial_id channel port timestamp_ns origin\n";
    char line[128];
    for (const auto& r : records) {
        std::snprintf(line, sizeof line, "%lld %d %d %s %.4f %s\n",
                      static_cast<long long>(r.sequence_id), r.trial_id, r.channel,
                      port_tag(r.port), r.timestamp_ns,
                      r.origin == ClickOrigin::Atom ? "atom" : "background");
        out << line;
    }
}

std::vector<DetectionRecord> read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read records: " + path);
    std::string header;
    std::getline(in, header);
    if (header.rfind("# atomlink-records v1", 0) != 0)
        throw std::runtime_error("unsupported record schema: " + path);

    std::vector<DetectionRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        long long seq;
        int trial, channel;
        std::string port, origin;
        double t;
        if (!(ls >> seq >> trial >> channel >> port >> t >> origin))
            throw std::runtime_error("malformed record line: " + line);
        DetectionRecord r;
        r.sequence_id = seq;
        r.trial_id = trial;
        r.channel = channel;
        r.port = port == "H" ? DetectorPort::H : port == "V" ? DetectorPort::V : DetectorPort::Unsplit;
        r.timestamp_ns = t;
        r.origin = origin == "atom" ? ClickOrigin::Atom : ClickOrigin::Background;
        out.push_back(r);
    }
    return out;
}

} // namespace atomlink::mc
