#include "atomlink/coupling.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace atomlink::optics {

namespace {
constexpr double kPi = std::numbers::pi;
}

void CollectionOptics::validate() const {
    if (numerical_aperture <= 0.0 || numerical_aperture >= 1.0)
        throw std::invalid_argument("optics: NA must be in (0, 1)");
    if (magnification <= 0.0) throw std::invalid_argument("optics: magnification must be > 0");
    if (mfd_x_um <= 0.0 || mfd_y_um <= 0.0)
        throw std::invalid_argument("optics: MFD components must be > 0");
    if (wavelength_um <= 0.0) throw std::invalid_argument("optics: wavelength must be > 0");
    if (eta0 <= 0.0 || eta0 > 1.0) throw std::invalid_argument("optics: eta0 must be in (0, 1]");
}

AtomPlaneMode atom_plane_mode(const CollectionOptics& o) {
    o.validate();
    return {o.mfd_x_um / 2.0 / o.magnification, o.mfd_y_um / 2.0 / o.magnification,
            o.wavelength_um / (kPi * o.numerical_aperture)};
}

double collection_psf_waist(const CollectionOptics& o) {
    return 0.42 * o.wavelength_um / o.numerical_aperture;
}

double defocus_scale(const CollectionOptics& o) {
    const auto m = atom_plane_mode(o);
    const double wbar = (m.w_x + m.w_y + m.w_coll) / 3.0;
    return 2.0 * kPi * wbar * wbar / o.wavelength_um;
}

double coupling_efficiency(const std::array<double, 3>& d, const CollectionOptics& o) {
    const auto m = atom_plane_mode(o);
    const double wp2 = collection_psf_waist(o) * collection_psf_waist(o);
    const double gx = std::exp(-2.0 * d[0] * d[0] / (m.w_x * m.w_x + wp2));
    const double gy = std::exp(-2.0 * d[1] * d[1] / (m.w_y * m.w_y + wp2));
    const double zr = d[2] / defocus_scale(o);
    return o.eta0 * gx * gy / (1.0 + zr * zr);
}

CouplingProfile sample_profile(const CollectionOptics& o, int axis, double extent_um,
                               std::size_t n_samples) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("sample_profile: axis must be 0..2");
    if (n_samples < 3) throw std::invalid_argument("sample_profile: need >= 3 samples");
    CouplingProfile prof;
    prof.displacement_um.reserve(n_samples);
    prof.efficiency.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double x =
            -extent_um + 2.0 * extent_um * static_cast<double>(i) / static_cast<double>(n_samples - 1);
        std::array<double, 3> d{0.0, 0.0, 0.0};
        d[static_cast<std::size_t>(axis)] = x;
        prof.displacement_um.push_back(x);
        prof.efficiency.push_back(coupling_efficiency(d, o));
    }
    prof.peak_efficiency = o.eta0;
    return prof;
}

double fwhm(const CouplingProfile& profile) {
    const auto& x = profile.displacement_um;
    const auto& y = profile.efficiency;
    if (x.size() != y.size() || x.size() < 3)
        throw std::invalid_argument("fwhm: malformed profile");

    std::size_t imax = 0;
    for (std::size_t i = 1; i < y.size(); ++i)
        if (y[i] > y[imax]) imax = i;
    const double half = y[imax] / 2.0;

    // walk outward from the peak to the half-max crossings
    double left = 0.0, right = 0.0;
    bool found_left = false, found_right = false;
    for (std::size_t i = imax; i-- > 0;) {
        if (y[i] <= half) {
            const double f = (half - y[i]) / (y[i + 1] - y[i]);
            left = x[i] + f * (x[i + 1] - x[i]);
            found_left = true;
            break;
        }
    }
    for (std::size_t i = imax + 1; i < y.size(); ++i) {
        if (y[i] <= half) {
            const double f = (y[i - 1] - half) / (y[i - 1] - y[i]);
            right = x[i - 1] + f * (x[i] - x[i - 1]);
            found_right = true;
            break;
        }
    }
    if (!found_left || !found_right)
        throw std::runtime_error("fwhm: profile does not cross half-max on both sides "
                                 "(too narrow or too wide for the sampled extent)");
    return right - left;
}

double map_atom_to_waveguide_plane(double position_um, const CollectionOptics& o) {
    return position_um * o.magnification;
}

} // namespace atomlink::optics
