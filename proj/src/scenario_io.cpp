#include "gridmdp/scenario_io.hpp"

#include "gridmdp/errors.hpp"
#include "gridmdp/synth.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gridmdp::io {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) {
        throw ConfigError(where + ": missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + ": field '" + key + "' has the wrong type");
    }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return field<T>(j, key, where);
}

const json& array_field(const json& j, const char* key, bool required) {
    static const json empty = json::array();
    if (!j.contains(key)) {
        if (required) throw ConfigError(std::string("grid: missing array '") + key + "'");
        return empty;
    }
    if (!j.at(key).is_array()) throw ConfigError(std::string("grid: '") + key + "' must be an array");
    return j.at(key);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_number(const std::string& cell, const fs::path& path, std::size_t line_no) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || cell.empty() || !std::isfinite(value)) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": '" + cell +
                          "' is not a finite number");
    }
    return value;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    return out;
}

fs::path resolve(const fs::path& base, const fs::path& p) {
    return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

grid::GridParams grid_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("grid: top level must be an object");
    grid::GridParams p;
    p.name = field_or<std::string>(j, "name", "grid", "grid");
    p.freq_limit = field_or<double>(j, "freq_limit_hz", 0.1, "grid");
    p.dt = field_or<double>(j, "dt_s", 300.0, "grid");
    std::size_t i = 0;
    for (const json& n : array_field(j, "nodes", true)) {
        const std::string where = "grid.nodes[" + std::to_string(i++) + "]";
        p.nodes.push_back({field<double>(n, "inertia", where), field<double>(n, "damping", where)});
    }
    i = 0;
    for (const json& l : array_field(j, "lines", false)) {
        const std::string where = "grid.lines[" + std::to_string(i++) + "]";
        p.lines.push_back({field<std::size_t>(l, "from", where), field<std::size_t>(l, "to", where),
                           field<double>(l, "susceptance", where),
                           field<double>(l, "capacity", where)});
    }
    i = 0;
    for (const json& g : array_field(j, "generators", true)) {
        const std::string where = "grid.generators[" + std::to_string(i++) + "]";
        p.generators.push_back({field<std::size_t>(g, "node", where),
                                field_or<double>(g, "p_min", 0.0, where),
                                field<double>(g, "p_max", where),
                                field<double>(g, "ramp_mw_per_s", where),
                                field<double>(g, "reserve_down", where),
                                field<double>(g, "reserve_up", where)});
    }
    i = 0;
    for (const json& w : array_field(j, "wind_farms", false)) {
        p.wind_farms.push_back({field<std::size_t>(w, "node", "grid.wind_farms[" + std::to_string(i++) + "]")});
    }
    i = 0;
    for (const json& b : array_field(j, "batteries", false)) {
        const std::string where = "grid.batteries[" + std::to_string(i++) + "]";
        p.batteries.push_back({field<std::size_t>(b, "node", where),
                               field<double>(b, "capacity_mwh", where),
                               field<double>(b, "rate_mw", where),
                               field<double>(b, "flex_decrease", where),
                               field<double>(b, "flex_increase", where),
                               field_or<double>(b, "efficiency", 1.0, where)});
    }
    i = 0;
    for (const json& l : array_field(j, "loads", false)) {
        p.loads.push_back({field<std::size_t>(l, "node", "grid.loads[" + std::to_string(i++) + "]")});
    }
    return p;
}

json grid_to_json(const grid::GridParams& p) {
    json j;
    j["name"] = p.name;
    j["freq_limit_hz"] = p.freq_limit;
    j["dt_s"] = p.dt;
    j["nodes"] = json::array();
    for (const auto& n : p.nodes) j["nodes"].push_back({{"inertia", n.inertia}, {"damping", n.damping}});
    j["lines"] = json::array();
    for (const auto& l : p.lines) {
        j["lines"].push_back({{"from", l.from}, {"to", l.to}, {"susceptance", l.susceptance},
                              {"capacity", l.capacity}});
    }
    j["generators"] = json::array();
    for (const auto& g : p.generators) {
        j["generators"].push_back({{"node", g.node}, {"p_min", g.p_min}, {"p_max", g.p_max},
                                   {"ramp_mw_per_s", g.ramp}, {"reserve_down", g.reserve_down},
                                   {"reserve_up", g.reserve_up}});
    }
    j["wind_farms"] = json::array();
    for (const auto& w : p.wind_farms) j["wind_farms"].push_back({{"node", w.node}});
    j["batteries"] = json::array();
    for (const auto& b : p.batteries) {
        j["batteries"].push_back({{"node", b.node}, {"capacity_mwh", b.capacity_mwh},
                                  {"rate_mw", b.rate_mw}, {"flex_decrease", b.flex_decrease},
                                  {"flex_increase", b.flex_increase}, {"efficiency", b.efficiency}});
    }
    j["loads"] = json::array();
    for (const auto& l : p.loads) j["loads"].push_back({{"node", l.node}});
    return j;
}

grid::GridParams load_grid(const fs::path& path) {
    try {
        return grid_from_json(read_json(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
}

Table read_table_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    Table table;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> cells = split(line);
        if (table.header.empty()) {
            if (cells.size() < 2 || cells.front() != "timestamp") {
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": header must start with 'timestamp' and name at least one column");
            }
            table.header.assign(cells.begin() + 1, cells.end());
            continue;
        }
        if (cells.size() != table.header.size() + 1) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(table.header.size() + 1) + " cells, got " +
                              std::to_string(cells.size()));
        }
        table.series.timestamps.push_back(parse_number(cells[0], path, line_no));
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_number(cells[c], path, line_no));
        table.series.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw ConfigError(path.string() + ": empty file");
    return table;
}

void write_table_csv(const fs::path& path, const std::vector<std::string>& header,
                     const grid::TimeSeries& series) {
    std::ofstream out = open_out(path);
    out << "timestamp";
    for (const auto& h : header) out << ',' << h;
    out << '\n';
    for (std::size_t k = 0; k < series.size(); ++k) {
        out << series.timestamps[k];
        for (double v : series.rows[k]) out << ',' << v;
        out << '\n';
    }
}

wind::ErrorSeries read_error_csv(const fs::path& path) {
    const Table table = read_table_csv(path);
    if (table.header != std::vector<std::string>{"forecast_mw", "actual_mw"}) {
        throw ConfigError(path.string() + ":1: header must be timestamp,forecast_mw,actual_mw");
    }
    std::vector<double> fc, act;
    for (const auto& row : table.series.rows) {
        fc.push_back(row[0]);
        act.push_back(row[1]);
    }
    try {
        return wind::ErrorSeries::from_columns(table.series.timestamps, std::move(fc), std::move(act));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_error_csv(const fs::path& path, const wind::ErrorSeries& series) {
    grid::TimeSeries ts;
    ts.timestamps = series.timestamps;
    for (std::size_t k = 0; k < series.size(); ++k) ts.rows.push_back({series.forecast[k], series.actual[k]});
    write_table_csv(path, {"forecast_mw", "actual_mw"}, ts);
}

json dtmc_to_json(const wind::WindDtmc& dtmc) {
    json j;
    j["n_bins"] = dtmc.size();
    j["edges"] = dtmc.edges();
    j["rep_value"] = dtmc.rep_values();
    j["trans"] = dtmc.trans();
    if (!dtmc.counts().empty()) j["counts"] = dtmc.counts();
    return j;
}

wind::WindDtmc dtmc_from_json(const json& j) {
    const std::string where = "dtmc";
    auto edges = field<std::vector<double>>(j, "edges", where);
    auto rep = field<std::vector<double>>(j, "rep_value", where);
    auto trans = field<wind::WindDtmc::Matrix>(j, "trans", where);
    auto counts = field_or<wind::WindDtmc::CountMatrix>(j, "counts", {}, where);
    if (j.contains("n_bins") && field<std::size_t>(j, "n_bins", where) != rep.size()) {
        throw ConfigError("dtmc: n_bins does not match the representative values");
    }
    return wind::WindDtmc(std::move(edges), std::move(rep), std::move(trans), std::move(counts));
}

void save_dtmc(const fs::path& path, const wind::WindDtmc& dtmc) {
    std::ofstream out = open_out(path);
    out << dtmc_to_json(dtmc).dump() << '\n';
}

wind::WindDtmc load_dtmc(const fs::path& path) {
    try {
        return dtmc_from_json(read_json(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

ScenarioConfig scenario_from_json(const json& j, const fs::path& base) {
    const std::string where = "scenario";
    if (!j.is_object()) throw ConfigError("scenario: top level must be an object");
    ScenarioConfig c;
    c.name = field_or<std::string>(j, "name", "scenario", where);
    c.grid = resolve(base, field<std::string>(j, "grid", where));
    c.load_profile = resolve(base, field<std::string>(j, "load_profile", where));
    c.wind_forecast = resolve(base, field<std::string>(j, "wind_forecast", where));
    if (j.contains("dtmc")) c.dtmc = resolve(base, field<std::string>(j, "dtmc", where));
    if (j.contains("wind_error")) c.wind_error = resolve(base, field<std::string>(j, "wind_error", where));
    if (j.contains("synthetic_wind")) {
        const json& s = j.at("synthetic_wind");
        SyntheticWind sw;
        sw.seed = field_or<std::uint64_t>(s, "seed", sw.seed, "scenario.synthetic_wind");
        sw.autocorrelation = field_or<double>(s, "autocorrelation", sw.autocorrelation, "scenario.synthetic_wind");
        sw.noise_mw = field_or<double>(s, "noise_mw", sw.noise_mw, "scenario.synthetic_wind");
        sw.days = field_or<double>(s, "days", sw.days, "scenario.synthetic_wind");
        sw.dt = field_or<double>(s, "dt_s", sw.dt, "scenario.synthetic_wind");
        c.synthetic_wind = sw;
    }
    const int sources = int(c.dtmc.has_value()) + int(c.wind_error.has_value()) +
                        int(c.synthetic_wind.has_value());
    if (sources != 1) {
        throw ConfigError("scenario: set exactly one of 'dtmc', 'wind_error', 'synthetic_wind'");
    }
    c.dt_control = field_or<double>(j, "dt_control_s", c.dt_control, where);
    c.simulation_hours = field_or<double>(j, "simulation_hours", c.simulation_hours, where);
    c.horizon = field_or<double>(j, "horizon_s", c.horizon, where);
    c.lambda = field_or<int>(j, "lambda", c.lambda, where);
    c.n_bins = field_or<std::size_t>(j, "n_bins", c.n_bins, where);
    c.violation_penalty = field_or<double>(j, "violation_penalty", c.violation_penalty, where);
    if (j.contains("battery_efficiency")) c.battery_efficiency = field<double>(j, "battery_efficiency", where);
    c.initial_soc = field_or<std::vector<double>>(j, "initial_soc", {}, where);
    c.initial_error = field_or<double>(j, "initial_error_mw", 0.0, where);
    c.jitter_mw = field_or<double>(j, "jitter_mw", 0.0, where);
    c.output_dir = resolve(base, field_or<std::string>(j, "output_dir", "results", where));
    return c;
}

ScenarioConfig load_scenario_config(const fs::path& path) {
    try {
        return scenario_from_json(read_json(path), path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

sim::Scenario build_scenario(const ScenarioConfig& c) {
    if (c.lambda < 2) throw ConfigError("lambda must be at least 2");
    if (!(c.dt_control > 0.0)) throw ConfigError("dt_control_s must be positive");
    const double h_steps = c.horizon / c.dt_control;
    if (c.horizon < c.dt_control || std::abs(h_steps - std::round(h_steps)) > 1e-9) {
        throw ConfigError("horizon_s must be a positive multiple of dt_control_s");
    }
    const double n_steps = c.simulation_hours * 3600.0 / c.dt_control;
    if (!(n_steps >= 1.0) || std::abs(n_steps - std::round(n_steps)) > 1e-9) {
        throw ConfigError("simulation_hours must cover a whole number of control steps");
    }
    if (c.n_bins < 2) throw ConfigError("n_bins must be at least 2");
    if (c.jitter_mw < 0.0) throw ConfigError("jitter_mw must be non-negative");

    grid::GridParams params = load_grid(c.grid);
    params.dt = c.dt_control;
    if (c.battery_efficiency) {
        for (auto& b : params.batteries) b.efficiency = *c.battery_efficiency;
    }
    grid::GridSpec spec(std::move(params));

    const Table loads = read_table_csv(c.load_profile);
    const Table forecast = read_table_csv(c.wind_forecast);
    grid::DayAheadSchedule schedule = grid::day_ahead_schedule(spec, loads.series, forecast.series);

    std::optional<wind::WindDtmc> dtmc;
    if (c.dtmc) {
        dtmc = load_dtmc(*c.dtmc);
    } else {
        wind::ErrorSeries series;
        if (c.wind_error) {
            series = read_error_csv(*c.wind_error);
        } else {
            synth::ErrorParams ep;
            ep.seed = c.synthetic_wind->seed;
            ep.autocorrelation = c.synthetic_wind->autocorrelation;
            ep.noise_mw = c.synthetic_wind->noise_mw;
            ep.dt = c.synthetic_wind->dt;
            ep.samples = static_cast<std::size_t>(std::llround(c.synthetic_wind->days * 86400.0 / ep.dt)) + 1;
            series = synth::ar1_error_series(ep);
        }
        try {
            series = wind::interpolate(series, c.dt_control);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("wind error series: ") + e.what());
        }
        dtmc = wind::estimate_dtmc(series, c.n_bins);
    }

    std::vector<double> soc = c.initial_soc;
    if (soc.empty()) soc.assign(spec.n_batteries(), 0.5);
    if (soc.size() != spec.n_batteries()) {
        throw ConfigError("initial_soc needs one entry per battery");
    }

    return sim::Scenario{.name = c.name,
                         .spec = std::move(spec),
                         .schedule = std::move(schedule),
                         .dtmc = std::move(*dtmc),
                         .initial_soc = std::move(soc),
                         .initial_error = c.initial_error,
                         .steps = static_cast<std::size_t>(std::llround(n_steps)),
                         .horizon_steps = static_cast<int>(std::llround(h_steps)),
                         .lambda = c.lambda,
                         .violation_penalty = c.violation_penalty,
                         .jitter_mw = c.jitter_mw,
                         .newton = {}};
}

json run_to_json(const sim::RunRecord& run) {
    json j;
    j["seed"] = run.seed;
    j["J_hz_h"] = run.J;
    j["failed"] = run.failed;
    if (run.failed) {
        j["failure_step"] = run.failure_step;
        j["failure_reason"] = run.failure_reason;
    }
    json steps = json::array();
    for (const sim::StepRecord& s : run.steps) {
        steps.push_back({{"k", s.state.x.k},
                         {"s_w", s.state.s_w},
                         {"realized_sw", s.realized_sw},
                         {"cost", s.cost},
                         {"omega", s.state.x.omega},
                         {"p_gen", s.state.x.p_gen},
                         {"soc", s.state.x.soc},
                         {"action", s.action.grid_index},
                         {"r_gen", s.action.control.r_gen},
                         {"r_stor", s.action.control.r_stor},
                         {"imbalance", s.action.imbalance},
                         {"states", s.states},
                         {"actions", s.actions}});
    }
    j["steps"] = std::move(steps);
    return j;
}

json campaign_to_json(const sim::Campaign& c) {
    json j;
    j["scenario"] = c.scenario;
    j["lambda"] = c.lambda;
    j["horizon_s"] = c.horizon_steps * c.dt;
    j["dt_control_s"] = c.dt;
    j["base_seed"] = c.base_seed;
    const sim::CampaignSummary& s = c.summary;
    json summary;
    summary["n_runs"] = s.n_runs;
    summary["completed"] = s.completed;
    summary["failure_rate"] = s.failure_rate;
    summary["degenerate"] = s.degenerate;
    summary["mean_J_hz_h"] = s.mean_J ? json(*s.mean_J) : json(nullptr);
    summary["ci95_half_width"] = s.ci_half_width ? json(*s.ci_half_width) : json(nullptr);
    summary["mean_states"] = s.mean_states;
    summary["mean_actions"] = s.mean_actions;
    j["summary"] = std::move(summary);
    json runs = json::array();
    for (const auto& r : c.runs) runs.push_back(run_to_json(r));
    j["runs"] = std::move(runs);
    return j;
}

void write_summary_header(std::ostream& out) {
    out << "scenario,lambda,horizon_s,mean_J_hz_h,ci95_half_width,failure_pct,mean_states,"
           "mean_actions,mean_iter_time_s\n";
}

void write_summary_row(std::ostream& out, const sim::Campaign& c) {
    const sim::CampaignSummary& s = c.summary;
    const auto opt = [](const std::optional<double>& v) {
        if (!v) return std::string("NA");
        std::ostringstream o;
        o.precision(10);
        o << *v;
        return o.str();
    };
    out << c.scenario << ',' << c.lambda << ',' << c.horizon_steps * c.dt << ',' << opt(s.mean_J)
        << ',' << opt(s.ci_half_width) << ',' << 100.0 * s.failure_rate << ',' << s.mean_states
        << ',' << s.mean_actions << ',' << s.mean_iteration_seconds << '\n';
}

}  // namespace gridmdp::io
