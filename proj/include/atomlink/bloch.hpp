#pragma once

#include <complex>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace atomlink::bloch {

// Frequency convention: quoted drive/dephasing/detuning frequencies f (MHz)
// enter as angular rates, Omega = 2*pi*f, in rad/ns. The decay Gamma is a
// plain rate 1/lifetime (1/26 ns^-1 by default, no 2*pi).
inline constexpr double default_decay_per_ns = 1.0 / 26.0;

double mhz_to_rad_per_ns(double f_mhz);

struct TwoLevelParams {
    std::function<double(double)> rabi_envelope; // t [ns] -> Omega(t) [rad/ns]
    double detuning = 0.0;  // rad/ns
    double dephasing = 0.0; // rad/ns, >= 0
    double decay = default_decay_per_ns; // rad/ns, > 0
};

struct BlochState {
    double rho11 = 1.0;
    double rho22 = 0.0;
    std::complex<double> rho12{0.0, 0.0};
    double rho_out = 0.0; // accumulated (2/3) Gamma rho22: population emitted as s+- photons
};

struct BlochTrajectory {
    double t_start = 0.0; // ns
    double dt = 0.0;      // ns
    std::vector<BlochState> states;

    double time_at(std::size_t i) const { return t_start + dt * static_cast<double>(i); }
    double t_end() const { return time_at(states.empty() ? 0 : states.size() - 1); }
    // linear interpolation of rho_out, clamped to the span
    double rho_out_at(double t) const;
};

// Fixed-step RK4 on
//   rho11' = -i Omega/2 (rho12 - rho21) + Gamma/3 rho22
//   rho22' = +i Omega/2 (rho12 - rho21) - Gamma rho22
//   rho12' = (-i delta - gamma) rho12 + i Omega/2 (rho22 - rho11)
// with rho21 = conj(rho12) and rho_out' = (2/3) Gamma rho22.
// Requires dt <= 0.1 / max(Gamma, max Omega, |delta|).
BlochTrajectory integrate(const TwoLevelParams& params, const BlochState& init,
                          std::pair<double, double> t_span, double dt);

// Histogram of emitted population per bin over [t_start, t_start + horizon],
// normalized to unit sum. Bin content is the rho_out increment across the bin.
std::vector<double> emission_profile(const BlochTrajectory& traj, double bin_ns,
                                     double horizon_ns);

// rho_out(window end) - rho_out(window start)
double excitation_efficiency(const BlochTrajectory& traj, std::pair<double, double> window);

enum class PulseKind { SmoothedSquare, Gaussian, Tabulated };

struct PulseSpec {
    PulseKind kind = PulseKind::SmoothedSquare;
    double fwhm_ns = 23.26;
    // full switching duration of each edge; the logistic edge scale is rise/8,
    // so an edge completes ~98% of its swing within rise_time_ns
    double rise_time_ns = 40.0;
    double peak_omega = 0.0; // rad/ns
    double center_ns = 0.0;
    // for Tabulated: (t_ns, relative amplitude) samples, linearly interpolated
    std::vector<std::pair<double, double>> samples;
};

// narrowest realizable smoothed-square FWHM for a given rise time
double min_smoothed_square_fwhm(double rise_time_ns);

// SmoothedSquare is the product of two logistic edges; the edge separation is
// calibrated so the realized FWHM equals fwhm_ns, then the curve is rescaled
// so its maximum equals peak_omega.
std::function<double(double)> pulse_envelope(const PulseSpec& spec);

// two-column text: t_ns relative_amplitude
std::vector<std::pair<double, double>> load_tabulated_envelope(const std::string& path);

struct ProfileFit {
    double fwhm_ns = 0.0, peak_omega = 0.0, detuning = 0.0, dephasing = 0.0, t0_ns = 0.0;
    double se_fwhm = 0.0, se_omega = 0.0, se_detuning = 0.0, se_dephasing = 0.0, se_t0 = 0.0;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string diagnostic;
};

// Least-squares fit of the normalized model emission profile to an observed
// histogram (needs >= 50 nonzero bins). The pulse family and rise time are
// held fixed; {fwhm, peak Omega, detuning, dephasing, t0} are free.
// Deterministic initial guesses: t0 near the observed peak, Omega from the
// pi-pulse heuristic pi/fwhm_guess, fwhm from the observed histogram width.
ProfileFit fit_profile(const std::vector<double>& observed, double bin_ns,
                       PulseKind kind, double rise_time_ns,
                       const double* initial_guess = nullptr);

// normalized model profile for a given parameter set (used by fit_profile and
// by synthetic-data generators)
std::vector<double> model_profile(double fwhm_ns, double peak_omega, double detuning,
                                  double dephasing, double t0_ns, PulseKind kind,
                                  double rise_time_ns, double bin_ns, double horizon_ns,
                                  double decay = default_decay_per_ns);

} // namespace atomlink::bloch
