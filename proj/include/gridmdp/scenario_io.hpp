#pragma once

#include "gridmdp/grid_model.hpp"
#include "gridmdp/simulation.hpp"
#include "gridmdp/wind_dtmc.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gridmdp::io {

namespace fs = std::filesystem;

/// Parameters of the seeded AR(1) wind error generator.
struct SyntheticWind {
    std::uint64_t seed = 1;
    double autocorrelation = 0.97;
    double noise_mw = 0.17;
    double days = 365.0;
    double dt = 900.0;
};

/**
 * Scenario file contents. Relative paths are resolved against the directory
 * of the file they were read from. Exactly one wind source is set: a chain
 * file, an error CSV or generator parameters.
 */
struct ScenarioConfig {
    std::string name;
    fs::path grid;
    fs::path load_profile;
    fs::path wind_forecast;
    std::optional<fs::path> wind_error;
    std::optional<fs::path> dtmc;
    std::optional<SyntheticWind> synthetic_wind;
    double dt_control = 300.0;      // s
    double simulation_hours = 24.0;
    double horizon = 300.0;         // s
    int lambda = 5;
    std::size_t n_bins = 41;
    double violation_penalty = 1e6;
    std::optional<double> battery_efficiency;  // overrides the grid file when set
    std::vector<double> initial_soc;           // empty: 0.5 for every battery
    double initial_error = 0.0;
    double jitter_mw = 0.0;
    fs::path output_dir = "results";
};

// Grid files
grid::GridParams grid_from_json(const nlohmann::json& j);
nlohmann::json grid_to_json(const grid::GridParams& params);
grid::GridParams load_grid(const fs::path& path);

// CSV with a leading timestamp column. Throws ConfigError naming the line.
struct Table {
    std::vector<std::string> header;  // without the timestamp column
    grid::TimeSeries series;
};
Table read_table_csv(const fs::path& path);
void write_table_csv(const fs::path& path, const std::vector<std::string>& header,
                     const grid::TimeSeries& series);

// Wind error CSV: timestamp,forecast_mw,actual_mw
wind::ErrorSeries read_error_csv(const fs::path& path);
void write_error_csv(const fs::path& path, const wind::ErrorSeries& series);

// Chain files
nlohmann::json dtmc_to_json(const wind::WindDtmc& dtmc);
wind::WindDtmc dtmc_from_json(const nlohmann::json& j);
void save_dtmc(const fs::path& path, const wind::WindDtmc& dtmc);
wind::WindDtmc load_dtmc(const fs::path& path);

// Scenarios
ScenarioConfig scenario_from_json(const nlohmann::json& j, const fs::path& base_dir);
ScenarioConfig load_scenario_config(const fs::path& path);

/// Loads every referenced file and assembles a runnable scenario.
sim::Scenario build_scenario(const ScenarioConfig& config);

// Campaign output
nlohmann::json run_to_json(const sim::RunRecord& run);
nlohmann::json campaign_to_json(const sim::Campaign& campaign);
void write_summary_header(std::ostream& out);
void write_summary_row(std::ostream& out, const sim::Campaign& campaign);

std::string read_text(const fs::path& path);
nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);

}  // namespace gridmdp::io
