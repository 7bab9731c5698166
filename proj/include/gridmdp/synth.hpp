#pragma once

#include "gridmdp/grid_model.hpp"
#include "gridmdp/wind_dtmc.hpp"

#include <cstdint>
#include <vector>

namespace gridmdp::synth {

struct ErrorParams {
    std::uint64_t seed = 1;
    double autocorrelation = 0.97;  // per sample
    double noise_mw = 0.17;         // innovation std
    std::size_t samples = 35041;    // one year at 15 min
    double dt = 900.0;              // s
    double forecast_mean = 1.0;     // MW
    double forecast_swing = 0.5;    // MW, daily amplitude
};

/// Forecast on a daily sine, actual = forecast + stationary AR(1) error.
wind::ErrorSeries ar1_error_series(const ErrorParams& params);

struct ProfileParams {
    std::uint64_t seed = 1;
    double hours = 24.0;
    double dt = 300.0;
    std::vector<double> load_base{1.5, 1.0, 1.5};  // MW per load asset
    double load_swing = 0.25;                      // relative daily amplitude
    double load_noise = 0.005;                     // relative, smoothed
    double forecast_mean = 1.0;                    // MW
    double forecast_swing = 0.5;                   // MW
};

struct Profiles {
    grid::TimeSeries loads;          // one column per load asset
    grid::TimeSeries wind_forecast;  // one column
};

/// Smooth daily load and wind forecast profiles, hours * 3600 / dt + 1 rows.
Profiles daily_profiles(const ProfileParams& params);

}  // namespace gridmdp::synth
