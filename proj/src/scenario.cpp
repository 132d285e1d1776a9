#include "atomlink/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace atomlink::harness {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

const std::set<std::string> kModes = {"scan",      "fluorescence", "entanglement",
                                      "fit-bloch", "fit-fringe",   "wgs",
                                      "plan"};

const std::set<std::string> kStochasticModes = {"scan", "fluorescence", "entanglement", "wgs"};

// recognized keys per section; validation rejects anything else
const std::map<std::string, std::set<std::string>> kSchema = {
    {"chain",
     {"p_init", "eta_ext", "eta_net", "eta_fiber", "eta_det", "background_rate_hz",
      "detection_window_ns"}},
    {"sequence",
     {"n_sites", "loading_probability", "trials_per_cycle", "atom_measurement_exposure_ms",
      "detection_slot_us", "heating_loss_per_run", "pushout_error", "pushout_repeats"}},
    {"pulse", {"kind", "fwhm_ns", "rise_time_ns", "peak_mhz", "detuning_mhz", "dephasing_mhz",
               "t0_ns", "bin_ns", "horizon_ns", "envelope_file"}},
    {"layout", {"r_ref_um", "delta_r_um", "n_sites"}},
    {"scan",
     {"steps", "extent_um", "plane", "trials", "exposure_ms", "rate_hz", "background_hz"}},
    {"run", {"sequences"}},
    {"entanglement",
     {"basis", "n_angles", "angle_span", "sequences_per_angle", "channel"}},
    {"imperfections",
     {"tilt_rad", "depolarize_on_init_failure", "zeeman_splitting_mhz", "precession_time_us"}},
    {"wgs", {"grid_n", "pitch_um", "iterations"}},
    {"optics",
     {"numerical_aperture", "magnification", "mfd_x_um", "mfd_y_um", "waveguide_pitch_um",
      "wavelength_um", "eta0"}},
    {"plan",
     {"distance_km", "attempt_period_us", "shuttle_spacing_um", "shuttle_speed_um_per_us",
      "fov_um", "site_spacing_um", "available_qubits", "success_prob_per_attempt",
      "duration_ms"}},
    {"fit", {"input_file", "bin_ns", "kind", "rise_time_ns", "angle_scale"}},
};

} // namespace

Scenario Scenario::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

Scenario Scenario::parse_text(const std::string& text, const std::string& origin) {
    Scenario sc;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ScenarioError(origin + ":" + std::to_string(lineno) +
                                    ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ScenarioError(origin + ":" + std::to_string(lineno) + ": empty section name");
            sc.sections_[section]; // register even when empty
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ScenarioError(origin + ":" + std::to_string(lineno) +
                                ": expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ScenarioError(origin + ":" + std::to_string(lineno) + ": empty key");

        if (section.empty()) {
            if (key == "mode") {
                sc.mode_ = value;
            } else if (key == "seed") {
                try {
                    sc.seed_ = std::stoull(value);
                } catch (const std::exception&) {
                    throw ScenarioError(origin + ":" + std::to_string(lineno) +
                                        ": seed must be an unsigned integer");
                }
            } else {
                throw ScenarioError(origin + ":" + std::to_string(lineno) +
                                    ": unknown top-level key '" + key + "'");
            }
        } else {
            sc.sections_[section][key] = value;
        }
    }
    return sc;
}

const std::string* Scenario::find(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    return &k->second;
}

bool Scenario::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::string Scenario::get_string(const std::string& section, const std::string& key,
                                 const std::string& fallback) const {
    const auto* v = find(section, key);
    return v ? *v : fallback;
}

double Scenario::get_double(const std::string& section, const std::string& key,
                            double fallback) const {
    const auto* v = find(section, key);
    if (!v) return fallback;
    try {
        std::size_t pos = 0;
        const double d = std::stod(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ScenarioError("[" + section + "]." + key + ": not a number: '" + *v + "'");
    }
}

long Scenario::get_long(const std::string& section, const std::string& key, long fallback) const {
    const auto* v = find(section, key);
    if (!v) return fallback;
    try {
        std::size_t pos = 0;
        const long d = std::stol(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ScenarioError("[" + section + "]." + key + ": not an integer: '" + *v + "'");
    }
}

bool Scenario::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const auto* v = find(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ScenarioError("[" + section + "]." + key + ": not a boolean: '" + *v + "'");
}

std::vector<double> Scenario::get_doubles(const std::string& section, const std::string& key,
                                          const std::vector<double>& fallback) const {
    const auto* v = find(section, key);
    if (!v) return fallback;
    std::vector<double> out;
    std::string item;
    std::istringstream in(*v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ScenarioError("[" + section + "]." + key + ": not a number list: '" + *v + "'");
        }
    }
    if (out.empty()) throw ScenarioError("[" + section + "]." + key + ": empty list");
    return out;
}

void Scenario::validate() const {
    if (mode_.empty()) throw ScenarioError("mode: missing (exactly one mode is required)");
    if (!kModes.count(mode_)) throw ScenarioError("mode: unknown mode '" + mode_ + "'");
    if (kStochasticModes.count(mode_) && !seed_.has_value())
        throw ScenarioError("seed: required for stochastic mode '" + mode_ + "'");
    for (const auto& [section, keys] : sections_) {
        const auto schema = kSchema.find(section);
        if (schema == kSchema.end())
            throw ScenarioError("[" + section + "]: unknown section");
        for (const auto& [key, value] : keys) {
            (void)value;
            if (!schema->second.count(key))
                throw ScenarioError("[" + section + "]." + key + ": unknown key");
        }
    }
}

std::string Scenario::canonical_text() const {
    std::ostringstream os;
    os << "mode = " << mode_ << "\n";
    if (seed_) os << "seed = " << *seed_ << "\n";
    for (const auto& [section, keys] : sections_) {
        os << "[" << section << "]\n";
        for (const auto& [key, value] : keys) os << key << " = " << value << "\n";
    }
    return os.str();
}

} // namespace atomlink::harness
