#include "gridmdp/synth.hpp"

#include "gridmdp/errors.hpp"
#include "gridmdp/rng.hpp"

#include <cmath>
#include <numbers>

namespace gridmdp::synth {

namespace {

constexpr double kDay = 86400.0;

double daily(double t, double phase) {
    return std::sin(2.0 * std::numbers::pi * t / kDay + phase);
}

}  // namespace

wind::ErrorSeries ar1_error_series(const ErrorParams& p) {
    if (!(p.dt > 0.0)) throw ConfigError("sample spacing must be positive");
    if (!(std::abs(p.autocorrelation) < 1.0)) throw ConfigError("autocorrelation must lie in (-1, 1)");
    if (p.noise_mw < 0.0) throw ConfigError("noise must be non-negative");
    Rng rng(p.seed);
    std::vector<double> ts(p.samples), fc(p.samples), act(p.samples);
    const double stationary = p.noise_mw / std::sqrt(1.0 - p.autocorrelation * p.autocorrelation);
    double e = stationary * rng.normal();
    for (std::size_t k = 0; k < p.samples; ++k) {
        const double t = p.dt * static_cast<double>(k);
        ts[k] = t;
        fc[k] = p.forecast_mean + p.forecast_swing * daily(t, -0.5 * std::numbers::pi);
        act[k] = fc[k] + e;
        e = p.autocorrelation * e + p.noise_mw * rng.normal();
    }
    return wind::ErrorSeries::from_columns(std::move(ts), std::move(fc), std::move(act));
}

Profiles daily_profiles(const ProfileParams& p) {
    if (!(p.dt > 0.0) || !(p.hours > 0.0)) throw ConfigError("hours and dt must be positive");
    const double steps_exact = p.hours * 3600.0 / p.dt;
    const auto steps = static_cast<std::size_t>(std::llround(steps_exact));
    if (std::abs(steps_exact - static_cast<double>(steps)) > 1e-9) {
        throw ConfigError("dt must divide the profile length");
    }
    Rng rng(p.seed);
    const std::size_t n_loads = p.load_base.size();
    std::vector<double> phase(n_loads);
    for (double& ph : phase) ph = rng.uniform(-0.3, 0.3) - 0.6 * std::numbers::pi;

    Profiles out;
    std::vector<double> wobble(n_loads, 0.0);
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = p.dt * static_cast<double>(k);
        std::vector<double> row(n_loads);
        for (std::size_t j = 0; j < n_loads; ++j) {
            // first-order filtered noise keeps the profile smooth
            wobble[j] = 0.9 * wobble[j] + p.load_noise * rng.normal();
            row[j] = p.load_base[j] * (1.0 + p.load_swing * daily(t, phase[j]) + wobble[j]);
        }
        out.loads.timestamps.push_back(t);
        out.loads.rows.push_back(std::move(row));
        out.wind_forecast.timestamps.push_back(t);
        out.wind_forecast.rows.push_back(
            {p.forecast_mean + p.forecast_swing * daily(t, -0.5 * std::numbers::pi)});
    }
    return out;
}

}  // namespace gridmdp::synth
