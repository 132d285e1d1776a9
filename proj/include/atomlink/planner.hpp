#pragma once

#include <string>

namespace atomlink::planner {

struct LinkParams {
    double distance_km = 55.0;
    double attempt_period_us = 20.0;
    double shuttle_spacing_um = 5.0;
    double shuttle_speed_um_per_us = 0.3;
    double fov_um = 1500.0;
    double site_spacing_um = 7.5;
    long available_qubits = 6000;
    double success_prob_per_attempt = 0.004;
    double duration_ms = 2.0;

    void validate() const;
};

// N_time = floor(5 L / tau); 5L is the round-trip heralding wait in us at
// ~2e8 m/s fiber propagation. The exact (un-floored) value is also exposed.
long time_mux_limit(double distance_km, double attempt_period_us);
double time_mux_limit_exact(double distance_km, double attempt_period_us);

double shuttle_time_us(double spacing_um, double speed_um_per_us);

long spatial_capacity(double fov_um, double site_spacing_um);
double spatial_capacity_exact(double fov_um, double site_spacing_um);

// modes * (duration / attempt period) * success probability
double bell_pair_throughput(long modes, double success_prob_per_attempt,
                            double attempt_period_us, double duration_ms);

// L* with available_qubits = 5 L*/tau; spatial multiplexing pays off below L*.
double crossover_distance_km(long available_qubits, double attempt_period_us);

// Fixed-order report table with consistency footnotes comparing the formula
// outputs against the commonly quoted reference operating points.
std::string report(const LinkParams& params);

} // namespace atomlink::planner
