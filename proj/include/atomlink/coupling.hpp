#pragma once

#include <array>
#include <vector>

namespace atomlink::optics {

// Scalar, separable Gaussian model of atom-to-waveguide coupling.
//
// Model definition (all lengths in um):
//   w_x, w_y   waveguide mode waists imaged back to the atom plane,
//              w = MFD/2 / magnification
//   w_coll     Gaussian waist matched to the collection NA, lambda/(pi NA)
//   w_psf      1/e^2 radius of the Gaussian fit to the diffraction-limited
//              collection spot, 0.42 lambda/NA (2 sigma with sigma = 0.21 lambda/NA);
//              this is the width that enters the transverse displacement response
//   eta(d)   = eta0 * exp(-2 dx^2/(w_x^2+w_psf^2)) * exp(-2 dy^2/(w_y^2+w_psf^2))
//                   / (1 + (dz/z_eff)^2)
//   z_eff    = 2 pi wbar^2 / lambda with wbar = (w_x + w_y + w_coll)/3
//              (the axial half-width of a two-Gaussian overlap is the sum of
//               the Rayleigh ranges; both beams are taken at the mean waist)
struct CollectionOptics {
    double numerical_aperture = 0.7;
    double magnification = 10.0 / 3.0;
    double mfd_x_um = 3.1;
    double mfd_y_um = 2.1;
    double waveguide_pitch_um = 25.0;
    double wavelength_um = 0.780;
    double eta0 = 0.5; // on-axis ceiling; folds in losses the model does not resolve

    void validate() const;
};

struct AtomPlaneMode {
    double w_x = 0.0;
    double w_y = 0.0;
    double w_coll = 0.0;
};

AtomPlaneMode atom_plane_mode(const CollectionOptics& optics);

// 1/e^2 PSF radius used in the transverse response
double collection_psf_waist(const CollectionOptics& optics);

// axial Lorentzian half-width
double defocus_scale(const CollectionOptics& optics);

double coupling_efficiency(const std::array<double, 3>& displacement_um,
                           const CollectionOptics& optics);

struct CouplingProfile {
    std::vector<double> displacement_um;
    std::vector<double> efficiency;
    double peak_efficiency = 0.0;
};

// samples eta along one axis (0=x, 1=y, 2=z) on a symmetric grid
CouplingProfile sample_profile(const CollectionOptics& optics, int axis, double extent_um,
                               std::size_t n_samples);

// linear-interpolated full width at half the peak value; throws when the
// profile does not cross half-max on both sides of its unique maximum
double fwhm(const CouplingProfile& profile);

double map_atom_to_waveguide_plane(double position_um, const CollectionOptics& optics);

} // namespace atomlink::optics
