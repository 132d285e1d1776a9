#pragma once

#include "atomlink/mc.hpp"
#include "atomlink/quantum.hpp"

#include <array>
#include <string>
#include <vector>

namespace atomlink::analysis {

// Blind by construction: estimators read records, presence flags and counts,
// never the simulation's origin-truth tags.

struct ChannelEstimate {
    double p = 0.0;
    double wilson_lo = 0.0, wilson_hi = 0.0; // 68% interval
    long clicks = 0;
    long attempts = 0;
    bool defined = false;
};

struct ConditionalProbs {
    std::vector<ChannelEstimate> given_present; // P(p_i | a_i)
    std::vector<ChannelEstimate> given_absent;  // P(p_i | not a_i)
};

// Clicks inside [0, window_ns) per excitation attempt, conditioned on the
// initial atom measurement of the matching site.
ConditionalProbs conditional_probs(const std::vector<mc::DetectionRecord>& records,
                                   const std::vector<std::vector<std::uint8_t>>& presence,
                                   int trials_per_sequence, double window_ns);

// eta_net = P / (p_init * eta_ext * eta_fiber * eta_det)
double infer_net_coupling(double p_click, double p_init, double eta_ext, double eta_fiber,
                          double eta_det);

struct CrosstalkMatrix {
    int n = 0;
    std::vector<double> ratio;        // row-major, diagonal exactly 1
    std::vector<long> attempts;       // conditioning attempts per entry
    std::vector<long> clicks;
    std::vector<std::uint8_t> defined;

    double at(int i, int j) const { return ratio[static_cast<std::size_t>(i * n + j)]; }
    bool is_defined(int i, int j) const { return defined[static_cast<std::size_t>(i * n + j)] != 0; }
    long attempts_at(int i, int j) const { return attempts[static_cast<std::size_t>(i * n + j)]; }
};

// off-diagonal (i,j): P(p_i | not a_i & a_j) / P(p_i | a_i)
CrosstalkMatrix crosstalk_matrix(const std::vector<mc::DetectionRecord>& records,
                                 const std::vector<std::vector<std::uint8_t>>& presence,
                                 int trials_per_sequence, double window_ns);

// Clicks in [pulse + 1 us, pulse + 11 us] divided by the total such exposure.
// Requires slots of at least pulse + 11 us.
std::vector<double> background_rate(const std::vector<mc::DetectionRecord>& records,
                                    double pulse_time_ns, int n_channels,
                                    long total_trials, double slot_ns);

struct FringeFit {
    double a = 0.0, b = 0.0, c = 0.0;
    double se_a = 0.0, se_b = 0.0, se_c = 0.0;
    double visibility = 0.0;       // |A| / C
    double visibility_two_a = 0.0; // 2 |A|, also reported (see README)
    double residual_rms = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string diagnostic;
};

// Weighted least squares of A sin(scale*theta + B) + C with binomial weights.
// `angle_scale` is the analyzer-angle convention constant (1 fits the raw
// A sin(theta+B)+C form; the atom-photon fringe uses quantum::hwp_angle_scale).
// Needs >= 4 distinct angles spanning at least half a period.
FringeFit fit_fringe(const std::vector<double>& angles, const std::vector<long>& successes,
                     const std::vector<long>& trials, double angle_scale = 1.0);

struct StokesEstimate {
    quantum::StokesVector s;
    std::array<double, 3> std_error{0.0, 0.0, 0.0};
    std::array<bool, 3> defined{false, false, false};
};

// s_k = (N+ - N-)/(N+ + N-) for the three analyzer settings
// (H/V -> s1, diagonal -> s2, circular -> s3), clamped to [-1, 1].
StokesEstimate stokes_estimate(const std::array<std::pair<long, long>, 3>& counts);

// SNR-limited upper bound on the visibility degradation: 1/snr.
double visibility_degradation(double snr);

struct Histogram {
    double bin_width = 1.0;
    double origin = 0.0; // left edge of counts[0]
    std::vector<long> counts;
    long total = 0;
};

Histogram histogram(const std::vector<double>& values, double bin_width);
Histogram histogram(const std::vector<long>& values, double bin_width);

// Wilson score interval (used for the small-probability estimates)
std::pair<double, double> wilson_interval(long successes, long trials, double z = 1.0);

} // namespace atomlink::analysis
