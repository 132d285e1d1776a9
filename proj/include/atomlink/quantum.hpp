#pragma once

#include <array>
#include <complex>
#include <optional>
#include <utility>

namespace atomlink::quantum {

using complexd = std::complex<double>;

// ---------------------------------------------------------------------------
// Conventions (single source of truth; every other module imports these)
//
//   circular basis:  |s+> = (|H> + i|V>)/sqrt(2),  |s-> = (|H> - i|V>)/sqrt(2)
//   Stokes:          s1 = |h|^2 - |v|^2, s2 = 2 Re(h* v), s3 = 2 Im(h* v)
//                    so |s+> has s3 = +1 and |s-> has s3 = -1
//   joint state:     amplitude order {m=+1,s-}, {m=+1,s+}, {m=-1,s-}, {m=-1,s+}
//   analyzer angle:  one HWP turn rotates the analyzed polarization by twice
//                    the mechanical angle; fringe fits take the scale factor
//                    as an explicit constant (see hwp_angle_scale)
// ---------------------------------------------------------------------------

inline constexpr double hwp_angle_scale = 2.0;

struct StokesVector {
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    double norm() const;
};

struct PolarizationKet {
    complexd amp_h{1.0, 0.0};
    complexd amp_v{0.0, 0.0};

    double norm() const;
    PolarizationKet normalized() const;
    complexd inner(const PolarizationKet& other) const; // <this|other>
    StokesVector stokes() const;
};

PolarizationKet ket_h();
PolarizationKet ket_v();
PolarizationKet ket_sigma_plus();
PolarizationKet ket_sigma_minus();

// |psi> = a |s-> + b |s+>, and the inverse decomposition
PolarizationKet from_circular(complexd a_minus, complexd b_plus);
std::pair<complexd, complexd> to_circular(const PolarizationKet& ket);

struct WaveplateSetting {
    double retardance = 0.0;      // radians; pi = half-wave, pi/2 = quarter-wave
    double fast_axis_angle = 0.0; // radians

    static WaveplateSetting half_wave(double angle);
    static WaveplateSetting quarter_wave(double angle);
    WaveplateSetting normalized() const; // retardance in [0, 2pi), angle in [0, pi)
};

PolarizationKet apply_waveplate(const PolarizationKet& ket, const WaveplateSetting& wp);

enum class BasisKind { Circular, Linear };

// Orthonormal analyzer pair; Circular gives
// {cos t |s+> + sin t |s->, -sin t |s+> + cos t |s->}, Linear the H/V analogue.
std::pair<PolarizationKet, PolarizationKet> analyzer_basis(double theta, BasisKind kind);

struct AtomKet {
    complexd amp_plus{0.0, 0.0};  // m = +1
    complexd amp_minus{0.0, 0.0}; // m = -1
    double norm() const;
};

struct JointAtomPhotonState {
    // order {m=+1,s-}, {m=+1,s+}, {m=-1,s-}, {m=-1,s+}
    std::array<complexd, 4> amp{};
    // optional Larmor precession of the m=+1 branch, default off
    double zeeman_splitting_mhz = 0.0;
    double elapsed_time_us = 0.0;

    double norm() const;
    // amplitudes with the precession phase exp(i 2 pi dnu t) applied to m=+1
    std::array<complexd, 4> phased() const;
};

// (|m=+1>|s-> + |m=-1>|s+>)/sqrt(2)
JointAtomPhotonState bell_state();

struct PhotonProjection {
    double probability = 0.0;
    std::optional<AtomKet> post_atom; // empty on a null outcome
};

struct AtomProjection {
    double probability = 0.0;
    std::optional<PolarizationKet> post_photon;
};

// Projects the photon onto `onto`; post atom state is renormalized.
// probability < 1e-15 signals a null outcome (no post state).
PhotonProjection project_photon(const JointAtomPhotonState& state, const PolarizationKet& onto);

// Probability that the atom survives a push-out keyed to m=+1, i.e. is found
// in m=-1, together with the heralded photon state.
AtomProjection project_atom_minus(const JointAtomPhotonState& state);

// Tr(rho^2) = (1 + |S|^2)/2; throws std::invalid_argument when |S| > 1 + 1e-9.
double stokes_and_purity(const StokesVector& s);

// ellipticity tan(chi) = cos(theta) for a collection axis tilted by theta
// from the quantization axis; returns tan(chi)
double tilt_ellipticity(double theta_tilt);

} // namespace atomlink::quantum
