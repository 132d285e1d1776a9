#include "atomlink/quantum.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace atomlink::quantum {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kInvSqrt2 = 0.7071067811865475244;
const complexd kI{0.0, 1.0};
} // namespace

double StokesVector::norm() const {
    return std::sqrt(s1 * s1 + s2 * s2 + s3 * s3);
}

double PolarizationKet::norm() const {
    return std::sqrt(std::norm(amp_h) + std::norm(amp_v));
}

PolarizationKet PolarizationKet::normalized() const {
    const double n = norm();
    if (n < 1e-300) throw std::invalid_argument("cannot normalize a zero polarization ket");
    return {amp_h / n, amp_v / n};
}

complexd PolarizationKet::inner(const PolarizationKet& other) const {
    return std::conj(amp_h) * other.amp_h + std::conj(amp_v) * other.amp_v;
}

StokesVector PolarizationKet::stokes() const {
    const complexd cross = std::conj(amp_h) * amp_v;
    return {std::norm(amp_h) - std::norm(amp_v), 2.0 * cross.real(), 2.0 * cross.imag()};
}

PolarizationKet ket_h() { return {1.0, 0.0}; }
PolarizationKet ket_v() { return {0.0, 1.0}; }
PolarizationKet ket_sigma_plus() { return {kInvSqrt2, kI * kInvSqrt2}; }
PolarizationKet ket_sigma_minus() { return {kInvSqrt2, -kI * kInvSqrt2}; }

PolarizationKet from_circular(complexd a_minus, complexd b_plus) {
    return {(a_minus + b_plus) * kInvSqrt2, kI * (b_plus - a_minus) * kInvSqrt2};
}

std::pair<complexd, complexd> to_circular(const PolarizationKet& ket) {
    const complexd a = (ket.amp_h + kI * ket.amp_v) * kInvSqrt2; // <s-|psi>
    const complexd b = (ket.amp_h - kI * ket.amp_v) * kInvSqrt2; // <s+|psi>
    return {a, b};
}

WaveplateSetting WaveplateSetting::half_wave(double angle) { return {kPi, angle}; }
WaveplateSetting WaveplateSetting::quarter_wave(double angle) { return {kPi / 2.0, angle}; }

WaveplateSetting WaveplateSetting::normalized() const {
    double r = std::fmod(retardance, 2.0 * kPi);
    if (r < 0.0) r += 2.0 * kPi;
    double a = std::fmod(fast_axis_angle, kPi);
    if (a < 0.0) a += kPi;
    return {r, a};
}

PolarizationKet apply_waveplate(const PolarizationKet& ket, const WaveplateSetting& wp) {
    // U = R(t) diag(1, e^{i d}) R(-t): the fast axis passes unretarded
    const double c = std::cos(wp.fast_axis_angle);
    const double s = std::sin(wp.fast_axis_angle);
    const complexd e = std::exp(kI * wp.retardance);
    const complexd u00 = c * c + e * s * s;
    const complexd u01 = c * s * (1.0 - e);
    const complexd u11 = s * s + e * c * c;
    return {u00 * ket.amp_h + u01 * ket.amp_v, u01 * ket.amp_h + u11 * ket.amp_v};
}

std::pair<PolarizationKet, PolarizationKet> analyzer_basis(double theta, BasisKind kind) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    if (kind == BasisKind::Linear) {
        return {PolarizationKet{c, s}, PolarizationKet{-s, c}};
    }
    return {from_circular(s, c), from_circular(c, -s)};
}

double AtomKet::norm() const {
    return std::sqrt(std::norm(amp_plus) + std::norm(amp_minus));
}

double JointAtomPhotonState::norm() const {
    double n2 = 0.0;
    for (const auto& a : amp) n2 += std::norm(a);
    return std::sqrt(n2);
}

std::array<complexd, 4> JointAtomPhotonState::phased() const {
    std::array<complexd, 4> out = amp;
    if (zeeman_splitting_mhz != 0.0 && elapsed_time_us != 0.0) {
        const complexd phase =
            std::exp(kI * (2.0 * kPi * zeeman_splitting_mhz * elapsed_time_us));
        out[0] *= phase;
        out[1] *= phase;
    }
    return out;
}

JointAtomPhotonState bell_state() {
    JointAtomPhotonState st;
    st.amp = {complexd{kInvSqrt2, 0.0}, complexd{0.0, 0.0}, complexd{0.0, 0.0},
              complexd{kInvSqrt2, 0.0}};
    return st;
}

PhotonProjection project_photon(const JointAtomPhotonState& state, const PolarizationKet& onto) {
    const auto [a_minus, b_plus] = to_circular(onto);
    const auto amp = state.phased();
    // <onto| acts on the photon factor of each atom row
    const complexd c_plus = std::conj(a_minus) * amp[0] + std::conj(b_plus) * amp[1];
    const complexd c_minus = std::conj(a_minus) * amp[2] + std::conj(b_plus) * amp[3];
    const double p = std::norm(c_plus) + std::norm(c_minus);
    PhotonProjection out;
    out.probability = p;
    if (p >= 1e-15) {
        const double n = std::sqrt(p);
        out.post_atom = AtomKet{c_plus / n, c_minus / n};
    }
    return out;
}

AtomProjection project_atom_minus(const JointAtomPhotonState& state) {
    const auto amp = state.phased();
    const double p = std::norm(amp[2]) + std::norm(amp[3]);
    AtomProjection out;
    out.probability = p;
    if (p >= 1e-15) {
        const double n = std::sqrt(p);
        out.post_photon = from_circular(amp[2] / n, amp[3] / n);
    }
    return out;
}

double stokes_and_purity(const StokesVector& s) {
    const double len = s.norm();
    if (len > 1.0 + 1e-9) throw std::invalid_argument("invalid Stokes vector: |S| > 1");
    return 0.5 * (1.0 + len * len);
}

double tilt_ellipticity(double theta_tilt) {
    return std::cos(theta_tilt);
}

} // namespace atomlink::quantum
