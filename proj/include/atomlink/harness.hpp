#pragma once

#include "atomlink/bloch.hpp"
#include "atomlink/scenario.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace atomlink::harness {

inline constexpr const char* kToolVersion = "atomlink-sim 1.0.0";

// Operating point of the reference excitation pulse used by the default
// scenarios (fitted drive parameters; decay fixed by the 26-ns lifetime).
struct ReferenceExcitation {
    double fwhm_ns = 23.26;
    double rise_time_ns = 40.0;
    double peak_omega = bloch::mhz_to_rad_per_ns(21.55);
    double detuning = bloch::mhz_to_rad_per_ns(-0.38);
    double dephasing = bloch::mhz_to_rad_per_ns(2.87);
    double t0_ns = 40.0;
    double bin_ns = 1.0;
    double horizon_ns = 150.0;
    // the detection gate opens at the excitation trigger, just before the
    // pulse rising edge, and stays open for window_ns
    double window_start_ns = 20.0;
    double window_ns = 100.0;
};

// normalized 1-ns emission profile at the reference operating point
std::vector<double> reference_emission_profile(const ReferenceExcitation& ref = {});

struct OutputFile {
    std::string name;       // relative to the output directory
    std::string digest;     // fnv1a-64, hex
    std::uint64_t bytes = 0;
};

struct RunManifest {
    std::string scenario_digest;
    std::string tool_version;
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
    std::vector<OutputFile> outputs;
};

// Executes the scenario's pipeline into out_dir and writes manifest.json.
// Identical scenario + seed reproduce identical output digests. On failure,
// partially written outputs are removed before the exception propagates.
RunManifest run(const Scenario& scenario, const std::string& out_dir,
                std::optional<std::uint64_t> seed_override = std::nullopt, int threads = 1);

// Report writers shared by the pipelines (and usable standalone): csv tables
// with one label column, and whitespace plot data with a header line. Empty
// results produce header-only files.
void write_table_csv(const std::string& path, const std::vector<std::string>& row_labels,
                     const std::vector<std::string>& col_labels,
                     const std::vector<std::vector<double>>& rows);
void write_plotdata(const std::string& path, const std::vector<std::string>& col_names,
                    const std::vector<std::vector<double>>& columns);

// fnv1a-64 content digest, hex-encoded
std::string file_digest(const std::string& path);
std::string text_digest(const std::string& text);

// re-hashes every output listed in the manifest and compares digests
bool verify_manifest(const RunManifest& manifest, const std::string& out_dir);

RunManifest load_manifest(const std::string& path);

} // namespace atomlink::harness
