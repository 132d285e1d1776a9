#include "atomlink/bloch.hpp"

#include "atomlink/fitting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace atomlink::bloch {

namespace {
constexpr double kPi = std::numbers::pi;

struct Deriv {
    double d11, d22, d_out;
    std::complex<double> d12;
};

// omega is pre-sampled on the half-step grid, so the hot loop has no
// std::function calls
Deriv rhs(const TwoLevelParams& p, double omega, const BlochState& s) {
    // rho12 - rho21 = 2i Im(rho12), so -i Omega/2 (rho12 - rho21) = Omega Im(rho12)
    const double drive = omega * s.rho12.imag();
    Deriv d;
    d.d11 = drive + (p.decay / 3.0) * s.rho22;
    d.d22 = -drive - p.decay * s.rho22;
    d.d12 = std::complex<double>(0.0, -p.detuning) * s.rho12 - p.dephasing * s.rho12 +
            std::complex<double>(0.0, omega / 2.0) * (s.rho22 - s.rho11);
    d.d_out = (2.0 / 3.0) * p.decay * s.rho22;
    return d;
}

BlochState advance(const BlochState& s, const Deriv& d, double h) {
    return {s.rho11 + h * d.d11, s.rho22 + h * d.d22, s.rho12 + h * d.d12,
            s.rho_out + h * d.d_out};
}

} // namespace

double mhz_to_rad_per_ns(double f_mhz) {
    return 2.0 * kPi * f_mhz * 1e-3;
}

double BlochTrajectory::rho_out_at(double t) const {
    if (states.empty()) return 0.0;
    const double rel = (t - t_start) / dt;
    if (rel <= 0.0) return states.front().rho_out;
    const auto last = static_cast<double>(states.size() - 1);
    if (rel >= last) return states.back().rho_out;
    const auto i = static_cast<std::size_t>(rel);
    const double f = rel - static_cast<double>(i);
    return states[i].rho_out * (1.0 - f) + states[i + 1].rho_out * f;
}

BlochTrajectory integrate(const TwoLevelParams& params, const BlochState& init,
                          std::pair<double, double> t_span, double dt) {
    if (params.decay <= 0.0) throw std::invalid_argument("integrate: decay must be positive");
    if (params.dephasing < 0.0) throw std::invalid_argument("integrate: dephasing must be >= 0");
    if (dt <= 0.0 || t_span.second <= t_span.first)
        throw std::invalid_argument("integrate: bad time span or step");

    // shrink the step to divide the span exactly, keeping the grid uniform
    const auto steps =
        static_cast<std::size_t>(std::ceil((t_span.second - t_span.first) / dt - 1e-9));
    dt = (t_span.second - t_span.first) / static_cast<double>(steps);

    // pre-sample the envelope on the half-step grid; this also feeds the
    // stability guard
    std::vector<double> omega(2 * steps + 1, 0.0);
    double omega_max = 0.0;
    if (params.rabi_envelope) {
        for (std::size_t i = 0; i < omega.size(); ++i) {
            omega[i] = params.rabi_envelope(t_span.first + dt / 2.0 * static_cast<double>(i));
            omega_max = std::max(omega_max, std::fabs(omega[i]));
        }
    }
    const double fastest = std::max({params.decay, omega_max, std::fabs(params.detuning)});
    if (dt > 0.1 / fastest)
        throw std::invalid_argument("integrate: dt exceeds the 0.1/max-rate stability guard");

    BlochTrajectory traj;
    traj.t_start = t_span.first;
    traj.dt = dt;
    traj.states.reserve(steps + 1);
    traj.states.push_back(init);

    BlochState s = init;
    for (std::size_t i = 0; i < steps; ++i) {
        const double om0 = omega[2 * i];
        const double om_mid = omega[2 * i + 1];
        const double om1 = omega[2 * i + 2];
        const Deriv k1 = rhs(params, om0, s);
        const Deriv k2 = rhs(params, om_mid, advance(s, k1, dt / 2.0));
        const Deriv k3 = rhs(params, om_mid, advance(s, k2, dt / 2.0));
        const Deriv k4 = rhs(params, om1, advance(s, k3, dt));
        s.rho11 += dt / 6.0 * (k1.d11 + 2.0 * k2.d11 + 2.0 * k3.d11 + k4.d11);
        s.rho22 += dt / 6.0 * (k1.d22 + 2.0 * k2.d22 + 2.0 * k3.d22 + k4.d22);
        s.rho12 += dt / 6.0 * (k1.d12 + 2.0 * k2.d12 + 2.0 * k3.d12 + k4.d12);
        s.rho_out += dt / 6.0 * (k1.d_out + 2.0 * k2.d_out + 2.0 * k3.d_out + k4.d_out);
        traj.states.push_back(s);
    }
    return traj;
}

std::vector<double> emission_profile(const BlochTrajectory& traj, double bin_ns,
                                     double horizon_ns) {
    if (bin_ns <= 0.0) throw std::invalid_argument("emission_profile: bin width must be positive");
    if (traj.t_start + horizon_ns > traj.t_end() + 1e-9)
        throw std::invalid_argument("emission_profile: horizon exceeds trajectory span");

    const auto nbins = static_cast<std::size_t>(std::floor(horizon_ns / bin_ns + 1e-9));
    std::vector<double> bins(nbins, 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < nbins; ++k) {
        const double a = traj.t_start + bin_ns * static_cast<double>(k);
        const double b = a + bin_ns;
        bins[k] = traj.rho_out_at(b) - traj.rho_out_at(a);
        total += bins[k];
    }
    if (total <= 1e-300) throw std::runtime_error("emission_profile: no emission to normalize");
    for (auto& v : bins) v /= total;
    return bins;
}

double excitation_efficiency(const BlochTrajectory& traj, std::pair<double, double> window) {
    return traj.rho_out_at(window.second) - traj.rho_out_at(window.first);
}

namespace {

// The smoothed square is the product of two logistic edges at t0 -+ h with
// scale s. rise_time is the full AOM switching duration: each edge completes
// 98% of its swing within it, so s = rise/8. In reduced units u = (t-t0)/s,
// c = h/s the normalized shape is
//   g(u) = (1+e^-c)^2 / (1 + 2 e^-c cosh u + e^-2c)
// whose half-maximum sits at u = arccosh(cosh c + 2). That inverts in closed
// form: c = arccosh(cosh(F/2s) - 2), feasible for F >= 2 s arccosh(3).
constexpr double kEdgeScaleDivisor = 8.0;

double edge_product(double t, double center, double half_sep, double s) {
    const double a = (t - (center - half_sep)) / s;
    const double b = ((center + half_sep) - t) / s;
    return 1.0 / (1.0 + std::exp(-a)) / (1.0 + std::exp(-b));
}

double edge_separation_for_fwhm(double fwhm, double s) {
    const double u = fwhm / (2.0 * s);
    if (u > 25.0) return u * s; // cosh overflow range; c -> u to double precision
    const double arg = std::cosh(u) - 2.0;
    if (arg < 1.0)
        throw std::invalid_argument("pulse_envelope: fwhm is narrower than the rise time allows");
    return std::acosh(arg) * s;
}

} // namespace

double min_smoothed_square_fwhm(double rise_time_ns) {
    const double s = std::max(rise_time_ns / kEdgeScaleDivisor, 1e-6);
    return 2.0 * s * std::acosh(3.0);
}

std::function<double(double)> pulse_envelope(const PulseSpec& spec) {
    if (spec.fwhm_ns <= 0.0 && spec.kind != PulseKind::Tabulated)
        throw std::invalid_argument("pulse_envelope: fwhm must be positive");
    if (spec.rise_time_ns < 0.0)
        throw std::invalid_argument("pulse_envelope: rise time must be >= 0");

    switch (spec.kind) {
    case PulseKind::Gaussian: {
        const double c = 4.0 * std::log(2.0) / (spec.fwhm_ns * spec.fwhm_ns);
        const double peak = spec.peak_omega;
        const double t0 = spec.center_ns;
        return [c, peak, t0](double t) {
            const double d = t - t0;
            return peak * std::exp(-c * d * d);
        };
    }
    case PulseKind::SmoothedSquare: {
        const double s = std::max(spec.rise_time_ns / kEdgeScaleDivisor, 1e-6);
        const double half_sep = edge_separation_for_fwhm(spec.fwhm_ns, s);
        const double raw_peak = edge_product(0.0, 0.0, half_sep, s);
        const double scale = spec.peak_omega / raw_peak;
        const double t0 = spec.center_ns;
        return [half_sep, s, scale, t0](double t) {
            return scale * edge_product(t, t0, half_sep, s);
        };
    }
    case PulseKind::Tabulated: {
        if (spec.samples.size() < 2)
            throw std::invalid_argument("pulse_envelope: tabulated envelope needs >= 2 samples");
        auto pts = spec.samples;
        std::sort(pts.begin(), pts.end());
        double raw_peak = 0.0;
        for (const auto& [t, a] : pts) raw_peak = std::max(raw_peak, a);
        if (raw_peak <= 0.0)
            throw std::invalid_argument("pulse_envelope: tabulated envelope is all zero");
        const double scale = spec.peak_omega / raw_peak;
        return [pts, scale](double t) {
            if (t <= pts.front().first || t >= pts.back().first) return 0.0;
            auto it = std::upper_bound(pts.begin(), pts.end(), std::make_pair(t, 1e300));
            const auto& [t1, a1] = *it;
            const auto& [t0, a0] = *(it - 1);
            const double f = (t - t0) / (t1 - t0);
            return scale * (a0 * (1.0 - f) + a1 * f);
        };
    }
    }
    throw std::logic_error("pulse_envelope: unknown kind");
}

std::vector<std::pair<double, double>> load_tabulated_envelope(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open envelope file: " + path);
    std::vector<std::pair<double, double>> pts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        double t, a;
        if (ls >> t >> a) pts.emplace_back(t, a);
    }
    if (pts.size() < 2) throw std::runtime_error("envelope file has fewer than 2 samples: " + path);
    return pts;
}

std::vector<double> model_profile(double fwhm_ns, double peak_omega, double detuning,
                                  double dephasing, double t0_ns, PulseKind kind,
                                  double rise_time_ns, double bin_ns, double horizon_ns,
                                  double decay) {
    PulseSpec spec;
    spec.kind = kind;
    spec.fwhm_ns = std::fabs(fwhm_ns);
    spec.rise_time_ns = rise_time_ns;
    spec.peak_omega = std::fabs(peak_omega);
    spec.center_ns = t0_ns;

    TwoLevelParams p;
    p.rabi_envelope = pulse_envelope(spec);
    p.detuning = detuning;
    p.dephasing = std::fabs(dephasing);
    p.decay = decay;

    // dyadic step sizes keep dt locally constant under small parameter
    // changes, so finite-difference gradients of the profile stay clean
    const double fastest =
        std::max({p.decay, spec.peak_omega, std::fabs(detuning), 1e-6});
    double dt = 0.25;
    while (dt > 0.09 / fastest) dt /= 2.0;
    const auto traj = integrate(p, BlochState{}, {0.0, horizon_ns + bin_ns}, dt);
    return emission_profile(traj, bin_ns, horizon_ns);
}

ProfileFit fit_profile(const std::vector<double>& observed, double bin_ns, PulseKind kind,
                       double rise_time_ns, const double* initial_guess) {
    std::size_t nonzero = 0;
    for (double v : observed)
        if (v > 0.0) ++nonzero;
    if (nonzero < 50)
        throw std::invalid_argument("fit_profile: need at least 50 nonzero bins");

    const double horizon = bin_ns * static_cast<double>(observed.size());

    // normalize the data so the model (unit sum) and data live on one scale
    std::vector<double> data = observed;
    double total = 0.0, vmax = 0.0;
    for (double v : data) {
        total += v;
        vmax = std::max(vmax, v);
    }
    for (auto& v : data) v /= total;

    // Poisson weights: sigma_i ~ sqrt(value); scale-invariant, floored so
    // empty bins stay finite
    std::vector<double> inv_sigma(data.size());
    const double eps = vmax / total * 1e-3;
    for (std::size_t i = 0; i < data.size(); ++i)
        inv_sigma[i] = 1.0 / std::sqrt(data[i] + eps);

    // deterministic start points: the data-driven width and peak location,
    // crossed with drive strengths from 1x to 4x the pi-pulse heuristic (a
    // structured profile with several Rabi cycles needs the larger ones)
    std::vector<std::vector<double>> starts;
    if (initial_guess) {
        starts.push_back({initial_guess[0], initial_guess[1], initial_guess[2], initial_guess[3],
                          initial_guess[4]});
    } else {
        // pulse extent from the emission mass. The tail after the pulse is a
        // pure Gamma decay, so walk from the right while the local log-slope
        // matches -Gamma; the pulse ends where that stops being true.
        std::vector<double> smooth(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            double acc = 0.0;
            int cnt = 0;
            for (int k = -2; k <= 2; ++k) {
                const auto j = static_cast<long>(i) + k;
                if (j >= 0 && j < static_cast<long>(data.size())) {
                    acc += data[static_cast<std::size_t>(j)];
                    ++cnt;
                }
            }
            smooth[i] = acc / cnt;
        }
        std::size_t imax = 0;
        for (std::size_t i = 1; i < smooth.size(); ++i)
            if (smooth[i] > smooth[imax]) imax = i;

        const double gamma_rate = default_decay_per_ns * bin_ns;
        const auto tail_like = [&](std::size_t t) {
            const std::size_t hi = std::min(t + 20, smooth.size());
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            int n = 0;
            for (std::size_t i = t; i < hi; ++i) {
                if (smooth[i] <= 0.0) continue;
                const double x = static_cast<double>(i), y = std::log(smooth[i]);
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                ++n;
            }
            if (n < 8) return true; // too few counts to refute a tail
            const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            return std::fabs(slope + gamma_rate) < 0.4 * gamma_rate;
        };
        std::size_t pulse_end = imax;
        for (std::size_t t = data.size() > 25 ? data.size() - 25 : 0; t > imax; --t) {
            if (!tail_like(t)) {
                pulse_end = t;
                break;
            }
        }
        std::size_t pulse_start = 0;
        while (pulse_start + 1 < imax && smooth[pulse_start] < 0.05 * smooth[imax]) ++pulse_start;

        const double extent = bin_ns * static_cast<double>(
                                  pulse_end > pulse_start ? pulse_end - pulse_start : 1);
        const double floor = (kind == PulseKind::SmoothedSquare)
                                 ? 1.05 * min_smoothed_square_fwhm(rise_time_ns)
                                 : 5.0;
        const double fwhm_guess = std::clamp(extent * 0.85, std::max(5.0, floor), 100.0);
        const double t0_guess =
            bin_ns * 0.5 * static_cast<double>(pulse_start + pulse_end);
        for (const double t0_shift : {-5.0, 0.0, 5.0})
            for (const double om_mult : {1.0, 2.0, 4.0, 6.0, 8.0, 10.0})
                starts.push_back({fwhm_guess, om_mult * kPi / fwhm_guess, 0.0, 0.01,
                                  std::max(bin_ns, t0_guess + t0_shift)});
    }

    // soft parameter box: the model is evaluated at the clamped point and the
    // violation comes back as extra smooth residuals, so the optimizer never
    // integrates at absurd rates (a huge Omega would force a tiny step size)
    const double fwhm_floor =
        kind == PulseKind::SmoothedSquare ? 1.001 * min_smoothed_square_fwhm(rise_time_ns) : 0.5;
    const std::array<std::pair<double, double>, 5> box{{{fwhm_floor, 150.0},
                                                        {1e-4, 1.5},
                                                        {-0.6, 0.6},
                                                        {0.0, 0.6},
                                                        {0.0, horizon}}};
    const auto residuals = [&](const std::vector<double>& p) {
        std::vector<double> q(5);
        double violation = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            q[j] = std::clamp(p[j], box[j].first, box[j].second);
            violation += std::fabs(p[j] - q[j]);
        }
        std::vector<double> r(data.size() + 1, 0.0);
        const auto model =
            model_profile(q[0], q[1], q[2], q[3], q[4], kind, rise_time_ns, bin_ns, horizon);
        for (std::size_t i = 0; i < data.size(); ++i)
            r[i] = (model[i] - data[i]) * inv_sigma[i];
        r.back() = violation * 100.0;
        return r;
    };

    // scout every start with a reduced iteration budget, rescout around the
    // winner (strongly driven profiles have near-periodic local minima offset
    // by one Rabi fringe, absorbed by Omega or the pulse width), then polish
    // the two best distinct candidates with the full budget
    fitting::FitResult best;
    if (starts.size() == 1) {
        best = fitting::levenberg_marquardt(residuals, starts.front(), fitting::FitOptions{});
    } else {
        std::vector<fitting::FitResult> pool;
        fitting::FitOptions scout;
        scout.max_iterations = 30;
        scout.relative_cost_tol = 1e-8;
        for (const auto& s : starts) pool.push_back(fitting::levenberg_marquardt(residuals, s, scout));
        std::size_t win = 0;
        for (std::size_t i = 1; i < pool.size(); ++i)
            if (pool[i].cost < pool[win].cost) win = i;

        fitting::FitOptions rescout;
        rescout.max_iterations = 60;
        rescout.relative_cost_tol = 1e-8;
        const auto fringe_base = pool[win].params;
        for (const double m : {0.85, 0.93, 1.08, 1.18}) {
            auto s = fringe_base;
            s[1] *= m;
            pool.push_back(fitting::levenberg_marquardt(residuals, s, rescout));
        }
        // width rescouts keep one pulse edge anchored: the misalignment lives
        // in the (fwhm, t0) pair with the better-determined edge fixed
        for (const double m : {0.90, 0.95, 1.05, 1.10}) {
            for (const double anchor : {+1.0, -1.0}) {
                auto s = fringe_base;
                s[0] *= m;
                s[4] += anchor * (m - 1.0) * fringe_base[0] / 2.0;
                pool.push_back(fitting::levenberg_marquardt(residuals, s, rescout));
            }
        }

        std::sort(pool.begin(), pool.end(),
                  [](const auto& a, const auto& b) { return a.cost < b.cost; });
        best = fitting::levenberg_marquardt(residuals, pool[0].params, fitting::FitOptions{});
        // the runner-up only matters when it sits in a different basin
        for (std::size_t i = 1; i < pool.size(); ++i) {
            if (std::fabs(pool[i].params[0] - pool[0].params[0]) >
                0.02 * std::fabs(pool[0].params[0])) {
                auto r = fitting::levenberg_marquardt(residuals, pool[i].params,
                                                      fitting::FitOptions{});
                if (r.cost < best.cost) best = std::move(r);
                break;
            }
        }
    }
    const auto& res = best;

    ProfileFit out;
    out.fwhm_ns = std::clamp(res.params[0], box[0].first, box[0].second);
    out.peak_omega = std::clamp(res.params[1], box[1].first, box[1].second);
    out.detuning = std::clamp(res.params[2], box[2].first, box[2].second);
    out.dephasing = std::clamp(res.params[3], box[3].first, box[3].second);
    out.t0_ns = std::clamp(res.params[4], box[4].first, box[4].second);
    out.se_fwhm = res.std_errors[0];
    out.se_omega = res.std_errors[1];
    out.se_detuning = res.std_errors[2];
    out.se_dephasing = res.std_errors[3];
    out.se_t0 = res.std_errors[4];
    out.cost = res.cost;
    out.iterations = res.iterations;
    out.converged = res.converged;
    out.diagnostic = res.diagnostic;
    return out;
}

} // namespace atomlink::bloch
