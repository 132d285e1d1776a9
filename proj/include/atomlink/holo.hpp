#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace atomlink::holo {

struct SiteLayout {
    std::array<double, 3> r_ref_um{0.0, 0.0, 0.0};
    std::array<double, 3> delta_r_um{7.5, 0.0, 0.0};
    int n_sites = 10;

    void validate() const;
};

// r_i = r_ref + i * delta_r
std::vector<std::array<double, 3>> target_positions(const SiteLayout& layout);

struct PhaseMask {
    std::size_t n = 0;            // grid side, power of two
    double pitch_um = 0.5;        // focal-plane um per frequency bin
    std::vector<double> phase;    // row-major, radians in [0, 2pi)
};

struct SpotMetrics {
    std::vector<double> intensities;     // per target, from the final forward pass
    double uniformity = 0.0;             // 1 - (Imax - Imin)/(Imax + Imin)
    double efficiency = 0.0;             // power in targets / total power
    std::vector<double> uniformity_history; // one entry per iteration
};

struct WgsResult {
    PhaseMask mask;
    SpotMetrics metrics;
};

// Weighted Gerchberg-Saxton on an N x N grid:
// random initial phase from the seed, forward transform of the unit-amplitude
// field, per-spot weights updated by the amplitude ratio mean|A|/|A_k|, target
// amplitudes re-imposed with phases retained, inverse transform, phase kept.
// Focal x/y positions (um) map to frequency bins via round(pos/pitch).
WgsResult wgs_synthesize(const std::vector<std::array<double, 2>>& targets_um,
                         std::size_t grid_n, double pitch_um, int iterations,
                         std::uint64_t seed);

// Independent check of a mask: direct DFT of exp(i phase) evaluated at the
// target bins only (no shared FFT code), plus total power for the efficiency.
SpotMetrics propagate_oracle(const PhaseMask& mask,
                             const std::vector<std::array<double, 2>>& targets_um);

enum class ScanPlane { XY, Z };

// Rigid displacement of the whole layout. XY: steps x steps layouts with
// r_ref offset on a centered grid spanning [-extent, +extent] in x and y.
// Z: `steps` layouts spanning [-extent, +extent] along z.
std::vector<SiteLayout> scan_grid(const SiteLayout& base, double extent_um, int steps,
                                  ScanPlane plane);

// index of the maximum total; ties resolve to the lowest index
struct ScanArgmax {
    std::size_t index = 0;
    double value = 0.0;
};
ScanArgmax argmax_scan(const std::vector<double>& totals);

// Mask export: text (header line then row-major phases) and binary with a
// 16-byte header: magic "APMK", uint32 N, float64 pitch, then float32 phases.
void save_mask_text(const PhaseMask& mask, const std::string& path);
void save_mask_binary(const PhaseMask& mask, const std::string& path);
PhaseMask load_mask_binary(const std::string& path);

} // namespace atomlink::holo
