#pragma once

#include "atomlink/coupling.hpp"
#include "atomlink/holo.hpp"
#include "atomlink/quantum.hpp"
#include "atomlink/rng.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace atomlink::mc {

// Multiplicative detection chain and per-channel backgrounds.
struct ChannelChain {
    double p_init = 0.90;
    double eta_ext = 0.67;
    std::vector<double> eta_net = {0.009, 0.008, 0.009, 0.010, 0.007,
                                   0.003, 0.010, 0.012, 0.003, 0.005};
    double eta_fiber = 0.8;
    double eta_det = 0.8;
    std::vector<double> background_rate_hz = {23.0, 20.0, 48.0, 31.0, 30.0,
                                              16.0, 27.0, 28.0, 22.0, 28.0};
    double detection_window_ns = 100.0;

    int n_channels() const { return static_cast<int>(eta_net.size()); }
    // p_init * eta_ext * eta_net[ch] * eta_fiber * eta_det
    double click_probability(int channel) const;
    void validate() const;
};

struct SequenceConfig {
    int n_sites = 10;
    double loading_probability = 0.5;
    int trials_per_cycle = 40;         // fluorescence mode; correlation mode caps at 30
    double atom_measurement_exposure_ms = 40.0;
    double detection_slot_us = 10.0;
    double heating_loss_per_run = 0.05;
    double pushout_error = 0.02;       // per push-out application, survival side
    int pushout_repeats = 5;
    std::uint64_t rng_seed = 1;

    void validate() const;
};

enum class DetectorPort { H, V, Unsplit };
enum class ClickOrigin { Atom, Background };

struct DetectionRecord {
    std::int64_t sequence_id = 0;
    int trial_id = 0;
    int channel = 0;
    DetectorPort port = DetectorPort::Unsplit;
    double timestamp_ns = 0.0;
    ClickOrigin origin = ClickOrigin::Atom; // simulation truth; analysis ignores it
};

// Inverse-CDF sampling over a normalized bin profile with uniform intra-bin jitter.
double emission_time_sample(const std::vector<double>& profile, double bin_ns, Rng& rng);

class EmissionSampler {
public:
    EmissionSampler() = default;
    EmissionSampler(std::vector<double> profile, double bin_ns);
    double sample(Rng& rng) const;
    static EmissionSampler exponential_fallback(double lifetime_ns = 26.0);

private:
    std::vector<double> profile_;
    double bin_ns_ = 1.0;
};

// One excitation trial on one channel. An atom click fires with the chain
// probability and is timestamped from the emission profile; a background
// click fires independently at background_rate over the whole detection slot.
// At most one record: the earlier click wins.
std::optional<DetectionRecord> sample_detection(const ChannelChain& chain, int channel,
                                                bool atom_present,
                                                const EmissionSampler& emission,
                                                double slot_ns, Rng& rng);

// Optional known-crosstalk injection for estimator oracles: channel `channel`
// clicks with probability ratio * P(p_ch|a_ch) whenever site `source_site` is
// occupied and site `channel` is empty.
struct CrosstalkInjection {
    int channel = -1;
    int source_site = -1;
    double ratio = 0.0;
};

struct FluorescenceRun {
    std::vector<DetectionRecord> records;
    std::vector<std::vector<std::uint8_t>> presence; // [sequence][site], initial measurement
};

// Fig-style fluorescence characterization: per sequence, Bernoulli loading per
// site, then trials_per_cycle excitation trials sampling every channel.
// Sequences draw from independent substreams "sequence/<id>", so results are
// identical for any thread count.
FluorescenceRun run_fluorescence_sequences(const SequenceConfig& config, const ChannelChain& chain,
                                           const EmissionSampler& emission,
                                           std::int64_t n_sequences, std::uint64_t master_seed,
                                           const CrosstalkInjection* injection = nullptr,
                                           int threads = 1);

struct ScanResult {
    std::vector<std::vector<long>> counts; // [layout][trial]
    std::vector<double> totals;            // per layout
};

// Position-scan fluorescence counts: per layout and trial, Bernoulli loading,
// then Poisson counts with mean rate*exposure*eta(displacement)/eta0 plus
// background*exposure. Displacement is measured from optimum_r_ref.
ScanResult run_scan_simulation(const std::vector<holo::SiteLayout>& layouts,
                               const optics::CollectionOptics& optics,
                               const std::array<double, 3>& optimum_r_ref,
                               double fluorescence_rate_hz, double background_rate_hz,
                               double exposure_ms, int trials_per_layout,
                               double loading_probability, std::uint64_t master_seed);

struct Imperfections {
    double tilt_rad = 0.0;                  // quantization-axis tilt; ellipticity cos(tilt)
    bool depolarize_on_init_failure = false; // default: failed init emits no detectable photon
    double zeeman_splitting_mhz = 0.0;
    double precession_time_us = 0.0;
};

struct EntanglementOutcome {
    std::int64_t sequence_id = 0;
    int trials_used = 0;
    double analyzer_angle = 0.0;
    quantum::BasisKind basis = quantum::BasisKind::Circular;
    DetectorPort port = DetectorPort::H;
    ClickOrigin origin = ClickOrigin::Atom;
    bool atom_survived = false;
};

struct EntanglementRun {
    std::vector<DetectionRecord> records;
    std::vector<EntanglementOutcome> outcomes;
};

// Correlation-mode sequence: excitation repeats until a click or the trial cap
// (30); the photon outcome is sampled from the projection probabilities of the
// (optionally imperfect) joint state, then the atom is projected by the
// pi-pulse + push-out emulation with survival-side errors.
EntanglementRun run_entanglement_sequences(const SequenceConfig& config, const ChannelChain& chain,
                                           quantum::BasisKind basis, double analyzer_angle,
                                           const Imperfections& imperfections,
                                           const EmissionSampler& emission, int channel,
                                           std::int64_t n_sequences, std::uint64_t master_seed,
                                           const std::string& stream_tag);

struct FringePoint {
    double angle = 0.0;
    long clicked_h = 0, survived_h = 0;
    long clicked_v = 0, survived_v = 0;
};

std::vector<FringePoint> run_entanglement_sweep(const SequenceConfig& config,
                                                const ChannelChain& chain,
                                                quantum::BasisKind basis,
                                                const std::vector<double>& angles,
                                                const Imperfections& imperfections,
                                                const EmissionSampler& emission, int channel,
                                                std::int64_t sequences_per_angle,
                                                std::uint64_t master_seed);

// the (optionally tilted) joint atom-photon state used by the correlation mode
quantum::JointAtomPhotonState entangled_state(const Imperfections& imperfections);

// Record stream I/O: line-delimited text with a schema version header.
void write_records(const std::string& path, const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> read_records(const std::string& path);

} // namespace atomlink::mc
