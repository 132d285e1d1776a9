#include "atomlink/holo.hpp"

#include "atomlink/fft.hpp"
#include "atomlink/rng.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace atomlink::holo {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_phase(double p) {
    p = std::fmod(p, kTwoPi);
    if (p < 0.0) p += kTwoPi;
    return p;
}

// focal position (um) -> frequency bin index on [0, n)
std::size_t focal_bin(double pos_um, double pitch_um, std::size_t n) {
    const double bins = pos_um / pitch_um;
    const auto half = static_cast<double>(n) / 2.0;
    if (std::fabs(bins) >= half)
        throw std::invalid_argument("wgs: target outside the focal field of view");
    long k = std::lround(bins);
    k %= static_cast<long>(n);
    if (k < 0) k += static_cast<long>(n);
    return static_cast<std::size_t>(k);
}

double uniformity_of(const std::vector<double>& intensities) {
    double lo = intensities.front(), hi = intensities.front();
    for (double v : intensities) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi + lo <= 0.0) return 0.0;
    return 1.0 - (hi - lo) / (hi + lo);
}
} // namespace

void SiteLayout::validate() const {
    if (n_sites < 1) throw std::invalid_argument("layout: n_sites must be >= 1");
    if (n_sites > 1) {
        const double d2 = delta_r_um[0] * delta_r_um[0] + delta_r_um[1] * delta_r_um[1] +
                          delta_r_um[2] * delta_r_um[2];
        if (d2 <= 0.0)
            throw std::invalid_argument("layout: delta_r must be nonzero for multiple sites");
    }
}

std::vector<std::array<double, 3>> target_positions(const SiteLayout& layout) {
    layout.validate();
    std::vector<std::array<double, 3>> out;
    out.reserve(static_cast<std::size_t>(layout.n_sites));
    for (int i = 0; i < layout.n_sites; ++i) {
        out.push_back({layout.r_ref_um[0] + i * layout.delta_r_um[0],
                       layout.r_ref_um[1] + i * layout.delta_r_um[1],
                       layout.r_ref_um[2] + i * layout.delta_r_um[2]});
    }
    return out;
}

WgsResult wgs_synthesize(const std::vector<std::array<double, 2>>& targets_um,
                         std::size_t grid_n, double pitch_um, int iterations,
                         std::uint64_t seed) {
    if (!is_power_of_two(grid_n)) throw std::invalid_argument("wgs: grid must be a power of two");
    if (targets_um.empty()) throw std::invalid_argument("wgs: no targets");
    if (iterations < 1) throw std::invalid_argument("wgs: iterations must be >= 1");

    const std::size_t n = grid_n;
    std::vector<std::size_t> bins;
    bins.reserve(targets_um.size());
    for (const auto& t : targets_um) {
        const std::size_t bx = focal_bin(t[0], pitch_um, n);
        const std::size_t by = focal_bin(t[1], pitch_um, n);
        bins.push_back(by * n + bx);
    }

    Rng rng(seed, "wgs/init");
    std::vector<double> phase(n * n);
    for (auto& p : phase) p = rng.uniform(0.0, kTwoPi);

    const std::size_t k = bins.size();
    std::vector<double> weights(k, 1.0);
    std::vector<std::complex<double>> field(n * n);
    SpotMetrics metrics;
    metrics.uniformity_history.reserve(static_cast<std::size_t>(iterations));

    for (int it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n * n; ++i)
            field[i] = std::polar(1.0, phase[i]);
        fft2d_inplace(field, n, false);

        double mean_amp = 0.0;
        std::vector<double> amps(k);
        for (std::size_t j = 0; j < k; ++j) {
            amps[j] = std::abs(field[bins[j]]);
            mean_amp += amps[j];
        }
        mean_amp /= static_cast<double>(k);

        std::vector<double> ints(k);
        for (std::size_t j = 0; j < k; ++j) ints[j] = amps[j] * amps[j];
        metrics.uniformity_history.push_back(uniformity_of(ints));

        for (std::size_t j = 0; j < k; ++j)
            weights[j] *= mean_amp / std::max(amps[j], 1e-30);

        // keep the retained spot phases, impose weighted amplitudes, zero elsewhere
        std::vector<std::complex<double>> retained(k);
        for (std::size_t j = 0; j < k; ++j) {
            const auto v = field[bins[j]];
            const double a = std::abs(v);
            retained[j] = (a > 1e-30) ? v / a : std::complex<double>(1.0, 0.0);
        }
        std::fill(field.begin(), field.end(), std::complex<double>(0.0, 0.0));
        for (std::size_t j = 0; j < k; ++j) field[bins[j]] = weights[j] * retained[j];

        fft2d_inplace(field, n, true);
        for (std::size_t i = 0; i < n * n; ++i) phase[i] = wrap_phase(std::arg(field[i]));
    }

    WgsResult out;
    out.mask.n = n;
    out.mask.pitch_um = pitch_um;
    out.mask.phase = std::move(phase);

    // final metrics from one more forward pass of the returned mask
    for (std::size_t i = 0; i < n * n; ++i)
        field[i] = std::polar(1.0, out.mask.phase[i]);
    fft2d_inplace(field, n, false);
    double total = 0.0;
    for (const auto& v : field) total += std::norm(v);
    metrics.intensities.resize(k);
    double in_targets = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        metrics.intensities[j] = std::norm(field[bins[j]]);
        in_targets += metrics.intensities[j];
    }
    metrics.uniformity = uniformity_of(metrics.intensities);
    metrics.efficiency = in_targets / total;
    out.metrics = std::move(metrics);
    return out;
}

SpotMetrics propagate_oracle(const PhaseMask& mask,
                             const std::vector<std::array<double, 2>>& targets_um) {
    const std::size_t n = mask.n;
    if (mask.phase.size() != n * n) throw std::invalid_argument("oracle: malformed mask");

    SpotMetrics m;
    m.intensities.reserve(targets_um.size());

    // unit-amplitude input under a unitary transform: total power equals the pixel count
    const double total = static_cast<double>(n * n);
    const double scale = 1.0 / static_cast<double>(n); // 1/sqrt(n) per 1D pass, squared grid
    for (const auto& t : targets_um) {
        const auto bx = static_cast<double>(focal_bin(t[0], mask.pitch_um, n));
        const auto by = static_cast<double>(focal_bin(t[1], mask.pitch_um, n));
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t r = 0; r < n; ++r) {
            const double ry = static_cast<double>(r) * by / static_cast<double>(n);
            for (std::size_t c = 0; c < n; ++c) {
                const double rx = static_cast<double>(c) * bx / static_cast<double>(n);
                const double ang = mask.phase[r * n + c] - kTwoPi * (rx + ry);
                acc += std::complex<double>(std::cos(ang), std::sin(ang));
            }
        }
        m.intensities.push_back(std::norm(acc * scale));
    }

    double lo = m.intensities.front(), hi = m.intensities.front(), in_targets = 0.0;
    for (double v : m.intensities) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        in_targets += v;
    }
    m.uniformity = (hi + lo > 0.0) ? 1.0 - (hi - lo) / (hi + lo) : 0.0;
    m.efficiency = in_targets / total;
    return m;
}

std::vector<SiteLayout> scan_grid(const SiteLayout& base, double extent_um, int steps,
                                  ScanPlane plane) {
    base.validate();
    if (steps < 1) throw std::invalid_argument("scan_grid: steps must be >= 1");

    const auto offset_at = [&](int i) {
        if (steps == 1) return 0.0;
        return -extent_um + 2.0 * extent_um * static_cast<double>(i) / static_cast<double>(steps - 1);
    };

    std::vector<SiteLayout> out;
    if (plane == ScanPlane::Z) {
        out.reserve(static_cast<std::size_t>(steps));
        for (int i = 0; i < steps; ++i) {
            SiteLayout l = base;
            l.r_ref_um[2] += offset_at(i);
            out.push_back(l);
        }
        return out;
    }
    out.reserve(static_cast<std::size_t>(steps) * static_cast<std::size_t>(steps));
    for (int iy = 0; iy < steps; ++iy) {
        for (int ix = 0; ix < steps; ++ix) {
            SiteLayout l = base;
            l.r_ref_um[0] += offset_at(ix);
            l.r_ref_um[1] += offset_at(iy);
            out.push_back(l);
        }
    }
    return out;
}

ScanArgmax argmax_scan(const std::vector<double>& totals) {
    if (totals.empty()) throw std::invalid_argument("argmax_scan: empty input");
    ScanArgmax best{0, totals[0]};
    for (std::size_t i = 1; i < totals.size(); ++i) {
        if (totals[i] > best.value) best = {i, totals[i]};
    }
    return best;
}

void save_mask_text(const PhaseMask& mask, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write mask: " + path);
    out << "atomlink-mask v1 n=" << mask.n << " pitch_um=" << mask.pitch_um << "\n";
    out.precision(9);
    for (std::size_t r = 0; r < mask.n; ++r) {
        for (std::size_t c = 0; c < mask.n; ++c) {
            if (c) out << ' ';
            out << mask.phase[r * mask.n + c];
        }
        out << '\n';
    }
}

void save_mask_binary(const PhaseMask& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write mask: " + path);
    char header[16] = {};
    std::memcpy(header, "APMK", 4);
    const auto n32 = static_cast<std::uint32_t>(mask.n);
    std::memcpy(header + 4, &n32, 4);
    std::memcpy(header + 8, &mask.pitch_um, 8);
    out.write(header, 16);
    std::vector<float> buf(mask.phase.begin(), mask.phase.end());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

PhaseMask load_mask_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read mask: " + path);
    char header[16];
    in.read(header, 16);
    if (!in || std::memcmp(header, "APMK", 4) != 0)
        throw std::runtime_error("bad mask header: " + path);
    std::uint32_t n32 = 0;
    std::memcpy(&n32, header + 4, 4);
    PhaseMask mask;
    mask.n = n32;
    std::memcpy(&mask.pitch_um, header + 8, 8);
    std::vector<float> buf(mask.n * mask.n);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated mask file: " + path);
    mask.phase.assign(buf.begin(), buf.end());
    return mask;
}

} // namespace atomlink::holo
