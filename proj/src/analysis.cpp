#include "atomlink/analysis.hpp"

#include "atomlink/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace atomlink::analysis {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::pair<double, double> wilson_interval(long successes, long trials, double z) {
    if (trials <= 0) return {0.0, 0.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace {

ChannelEstimate make_estimate(long clicks, long attempts) {
    ChannelEstimate e;
    e.clicks = clicks;
    e.attempts = attempts;
    if (attempts > 0) {
        e.defined = true;
        e.p = static_cast<double>(clicks) / static_cast<double>(attempts);
        std::tie(e.wilson_lo, e.wilson_hi) = wilson_interval(clicks, attempts);
    }
    return e;
}

} // namespace

ConditionalProbs conditional_probs(const std::vector<mc::DetectionRecord>& records,
                                   const std::vector<std::vector<std::uint8_t>>& presence,
                                   int trials_per_sequence, double window_ns) {
    if (presence.empty()) throw std::invalid_argument("conditional_probs: no presence flags");
    const auto n_ch = presence.front().size();
    const auto n_seq = presence.size();

    std::vector<long> present_attempts(n_ch, 0), absent_attempts(n_ch, 0);
    for (const auto& seq : presence) {
        if (seq.size() != n_ch)
            throw std::invalid_argument("conditional_probs: ragged presence flags");
        for (std::size_t ch = 0; ch < n_ch; ++ch)
            (seq[ch] ? present_attempts : absent_attempts)[ch] += trials_per_sequence;
    }

    std::vector<long> present_clicks(n_ch, 0), absent_clicks(n_ch, 0);
    for (const auto& r : records) {
        if (r.timestamp_ns >= window_ns) continue;
        const auto seq = static_cast<std::size_t>(r.sequence_id);
        const auto ch = static_cast<std::size_t>(r.channel);
        if (seq >= n_seq || ch >= n_ch)
            throw std::invalid_argument("conditional_probs: record id outside presence table");
        (presence[seq][ch] ? present_clicks : absent_clicks)[ch] += 1;
    }

    ConditionalProbs out;
    for (std::size_t ch = 0; ch < n_ch; ++ch) {
        out.given_present.push_back(make_estimate(present_clicks[ch], present_attempts[ch]));
        out.given_absent.push_back(make_estimate(absent_clicks[ch], absent_attempts[ch]));
    }
    return out;
}

double infer_net_coupling(double p_click, double p_init, double eta_ext, double eta_fiber,
                          double eta_det) {
    const double denom = p_init * eta_ext * eta_fiber * eta_det;
    if (denom <= 0.0)
        throw std::invalid_argument("infer_net_coupling: chain factors must be positive");
    return p_click / denom;
}

CrosstalkMatrix crosstalk_matrix(const std::vector<mc::DetectionRecord>& records,
                                 const std::vector<std::vector<std::uint8_t>>& presence,
                                 int trials_per_sequence, double window_ns) {
    const auto probs = conditional_probs(records, presence, trials_per_sequence, window_ns);
    const int n = static_cast<int>(presence.front().size());
    const auto nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);

    CrosstalkMatrix m;
    m.n = n;
    m.ratio.assign(nn, 0.0);
    m.attempts.assign(nn, 0);
    m.clicks.assign(nn, 0);
    m.defined.assign(nn, 0);

    // conditioning attempts per (i empty, j occupied) pair
    for (const auto& seq : presence) {
        for (int i = 0; i < n; ++i) {
            if (seq[static_cast<std::size_t>(i)]) continue;
            for (int j = 0; j < n; ++j) {
                if (i == j || !seq[static_cast<std::size_t>(j)]) continue;
                m.attempts[static_cast<std::size_t>(i * n + j)] += trials_per_sequence;
            }
        }
    }
    for (const auto& r : records) {
        if (r.timestamp_ns >= window_ns) continue;
        const auto& seq = presence[static_cast<std::size_t>(r.sequence_id)];
        const int i = r.channel;
        if (seq[static_cast<std::size_t>(i)]) continue;
        for (int j = 0; j < n; ++j) {
            if (i == j || !seq[static_cast<std::size_t>(j)]) continue;
            m.clicks[static_cast<std::size_t>(i * n + j)] += 1;
        }
    }

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const auto idx = static_cast<std::size_t>(i * n + j);
            if (i == j) {
                m.ratio[idx] = 1.0;
                m.attempts[idx] = probs.given_present[static_cast<std::size_t>(i)].attempts;
                m.clicks[idx] = probs.given_present[static_cast<std::size_t>(i)].clicks;
                m.defined[idx] = 1;
                continue;
            }
            const auto& diag = probs.given_present[static_cast<std::size_t>(i)];
            if (m.attempts[idx] > 0 && diag.defined && diag.p > 0.0) {
                const double p_off = static_cast<double>(m.clicks[idx]) /
                                     static_cast<double>(m.attempts[idx]);
                m.ratio[idx] = p_off / diag.p;
                m.defined[idx] = 1;
            }
        }
    }
    return m;
}

std::vector<double> background_rate(const std::vector<mc::DetectionRecord>& records,
                                    double pulse_time_ns, int n_channels, long total_trials,
                                    double slot_ns) {
    const double lo = pulse_time_ns + 1e3;
    const double hi = pulse_time_ns + 11e3;
    if (slot_ns < hi)
        throw std::invalid_argument("background_rate: slots must be at least 11 us past the pulse");
    if (total_trials <= 0) throw std::invalid_argument("background_rate: no trials");

    std::vector<long> clicks(static_cast<std::size_t>(n_channels), 0);
    for (const auto& r : records) {
        if (r.timestamp_ns >= lo && r.timestamp_ns < hi)
            clicks[static_cast<std::size_t>(r.channel)] += 1;
    }
    const double exposure_s = static_cast<double>(total_trials) * 10e-6;
    std::vector<double> rates(static_cast<std::size_t>(n_channels));
    for (std::size_t ch = 0; ch < rates.size(); ++ch)
        rates[ch] = static_cast<double>(clicks[ch]) / exposure_s;
    return rates;
}

FringeFit fit_fringe(const std::vector<double>& angles, const std::vector<long>& successes,
                     const std::vector<long>& trials, double angle_scale) {
    const std::size_t n = angles.size();
    if (successes.size() != n || trials.size() != n)
        throw std::invalid_argument("fit_fringe: size mismatch");

    std::set<double> distinct(angles.begin(), angles.end());
    if (distinct.size() < 4)
        throw std::invalid_argument("fit_fringe: need >= 4 distinct angles");
    const double span = *distinct.rbegin() - *distinct.begin();
    const double period = 2.0 * kPi / std::fabs(angle_scale);
    if (span + 1e-12 < period / 2.0)
        throw std::invalid_argument("fit_fringe: angles must span at least half a period");

    std::vector<double> p(n), sigma(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (trials[i] <= 0) throw std::invalid_argument("fit_fringe: zero-trial angle");
        p[i] = static_cast<double>(successes[i]) / static_cast<double>(trials[i]);
        // Agresti-style variance floor keeps weights finite at p = 0 or 1
        const double pt = (static_cast<double>(successes[i]) + 1.0) /
                          (static_cast<double>(trials[i]) + 2.0);
        sigma[i] = std::sqrt(pt * (1.0 - pt) / static_cast<double>(trials[i]));
    }

    const auto residuals = [&](const std::vector<double>& q) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double model = q[0] * std::sin(angle_scale * angles[i] + q[1]) + q[2];
            r[i] = (model - p[i]) / sigma[i];
        }
        return r;
    };

    // deterministic initial guess: mean offset, half-range amplitude, best of a
    // coarse phase grid
    double pmin = p[0], pmax = p[0], pmean = 0.0;
    for (double v : p) {
        pmin = std::min(pmin, v);
        pmax = std::max(pmax, v);
        pmean += v;
    }
    pmean /= static_cast<double>(n);
    const double a0 = std::max(0.5 * (pmax - pmin), 1e-4);
    double best_b = 0.0, best_cost = 1e300;
    for (int k = 0; k < 16; ++k) {
        const double b = 2.0 * kPi * k / 16.0;
        const auto r = residuals({a0, b, pmean});
        double c = 0.0;
        for (double v : r) c += v * v;
        if (c < best_cost) {
            best_cost = c;
            best_b = b;
        }
    }

    fitting::FitOptions opt;
    opt.residuals_are_weighted = true;
    const auto res = fitting::levenberg_marquardt(residuals, {a0, best_b, pmean}, opt);

    FringeFit out;
    out.a = res.params[0];
    out.b = res.params[1];
    out.c = res.params[2];
    // canonical form: positive amplitude, phase in [0, 2 pi)
    if (out.a < 0.0) {
        out.a = -out.a;
        out.b += kPi;
    }
    out.b = std::fmod(out.b, 2.0 * kPi);
    if (out.b < 0.0) out.b += 2.0 * kPi;
    out.se_a = res.std_errors[0];
    out.se_b = res.std_errors[1];
    out.se_c = res.std_errors[2];
    out.visibility = out.c > 0.0 ? std::fabs(out.a) / out.c : 0.0;
    out.visibility_two_a = 2.0 * std::fabs(out.a);
    out.iterations = res.iterations;
    out.converged = res.converged;
    out.diagnostic = res.diagnostic;

    double ss = 0.0;
    const auto r = residuals(res.params);
    for (std::size_t i = 0; i < n; ++i) {
        const double raw = r[i] * sigma[i];
        ss += raw * raw;
    }
    out.residual_rms = std::sqrt(ss / static_cast<double>(n));
    return out;
}

StokesEstimate stokes_estimate(const std::array<std::pair<long, long>, 3>& counts) {
    StokesEstimate out;
    double* comps[3] = {&out.s.s1, &out.s.s2, &out.s.s3};
    for (std::size_t k = 0; k < 3; ++k) {
        const auto [n_plus, n_minus] = counts[k];
        const long total = n_plus + n_minus;
        if (total <= 0) continue;
        out.defined[k] = true;
        const double v = static_cast<double>(n_plus - n_minus) / static_cast<double>(total);
        *comps[k] = std::clamp(v, -1.0, 1.0);
        const double pp = static_cast<double>(n_plus) / static_cast<double>(total);
        out.std_error[k] = 2.0 * std::sqrt(std::max(pp * (1.0 - pp), 1e-12) /
                                           static_cast<double>(total));
    }
    return out;
}

double visibility_degradation(double snr) {
    if (snr <= 0.0) throw std::invalid_argument("visibility_degradation: snr must be positive");
    return 1.0 / snr;
}

namespace {
Histogram build_histogram(const std::vector<double>& values, double bin_width) {
    if (bin_width <= 0.0) throw std::invalid_argument("histogram: bin width must be positive");
    Histogram h;
    h.bin_width = bin_width;
    if (values.empty()) return h;
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const auto first = static_cast<long>(std::floor(lo / bin_width));
    const auto last = static_cast<long>(std::floor(hi / bin_width));
    h.origin = static_cast<double>(first) * bin_width;
    h.counts.assign(static_cast<std::size_t>(last - first + 1), 0);
    for (double v : values) {
        const auto idx = static_cast<long>(std::floor(v / bin_width)) - first;
        h.counts[static_cast<std::size_t>(idx)] += 1;
        ++h.total;
    }
    return h;
}
} // namespace

Histogram histogram(const std::vector<double>& values, double bin_width) {
    return build_histogram(values, bin_width);
}

Histogram histogram(const std::vector<long>& values, double bin_width) {
    std::vector<double> v(values.begin(), values.end());
    return build_histogram(v, bin_width);
}

} // namespace atomlink::analysis
