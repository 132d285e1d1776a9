#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace atomlink::harness {

// Scenario schema violation; the CLI maps this to exit code 2.
struct ScenarioError : std::runtime_error {
    explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric non-convergence anywhere in a pipeline; CLI exit code 3.
struct NonConvergenceError : std::runtime_error {
    explicit NonConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Plain-text scenario: `key = value` lines grouped under [section] headers,
// '#' comments. Top-level keys (before any section) are `mode` and `seed`.
class Scenario {
public:
    static Scenario parse_file(const std::string& path);
    static Scenario parse_text(const std::string& text, const std::string& origin = "<inline>");

    const std::string& mode() const { return mode_; }
    void set_mode(const std::string& mode) { mode_ = mode; }
    std::optional<std::uint64_t> seed() const { return seed_; }
    void set_seed(std::uint64_t seed) { seed_ = seed; }

    bool has(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long get_long(const std::string& section, const std::string& key, long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) const;

    // rejects unknown modes/sections/keys and missing seeds for stochastic
    // modes; errors carry [section].key field paths
    void validate() const;

    // canonical text form (sorted sections/keys) used for the manifest digest
    std::string canonical_text() const;

private:
    std::string mode_;
    std::optional<std::uint64_t> seed_;
    std::map<std::string, std::map<std::string, std::string>> sections_;

    const std::string* find(const std::string& section, const std::string& key) const;
};

} // namespace atomlink::harness
