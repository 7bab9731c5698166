// gridmdp: estimate wind chains, run receding-horizon campaigns, generate data.

#include "gridmdp/errors.hpp"
#include "gridmdp/scenario_io.hpp"
#include "gridmdp/simulation.hpp"
#include "gridmdp/synth.hpp"
#include "gridmdp/wind_dtmc.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace gridmdp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDegenerate = 1;
constexpr int kExitUsage = 2;

struct EstimateArgs {
    fs::path input;
    fs::path out = "dtmc.json";
    std::size_t bins = 41;
    double interpolate_dt = 0.0;
};

struct RunArgs {
    fs::path config;
    std::optional<fs::path> grid;
    std::vector<int> lambdas;
    std::vector<double> horizons;
    std::size_t runs = 1;
    std::uint64_t seed = 1;
    std::optional<fs::path> out;
    unsigned threads = 0;
};

struct SynthArgs {
    std::uint64_t seed = 1;
    double hours = 24.0;
    double dt = 300.0;
    fs::path out = "data";
    double autocorrelation = 0.97;
    double noise = 0.17;
    double error_days = 365.0;
    double error_dt = 900.0;
};

int cmd_estimate(const EstimateArgs& a) {
    wind::ErrorSeries series = io::read_error_csv(a.input);
    if (a.interpolate_dt > 0.0) {
        try {
            series = wind::interpolate(series, a.interpolate_dt);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    const wind::WindDtmc dtmc = wind::estimate_dtmc(series, a.bins);
    io::save_dtmc(a.out, dtmc);
    const wind::DominanceSummary dom = wind::diagonal_dominance(dtmc);
    std::printf("bins %zu  range [%.4f, %.4f] MW  samples %zu\n", dtmc.size(), dtmc.edges().front(),
                dtmc.edges().back(), series.size());
    std::printf("diagonally dominant rows: %zu of %zu populated (%.1f%%)\n", dom.dominant_rows,
                dom.populated_rows, 100.0 * dom.fraction());
    std::printf("wrote %s\n", a.out.string().c_str());
    return kExitOk;
}

int cmd_run(const RunArgs& a) {
    io::ScenarioConfig config = io::load_scenario_config(a.config);
    if (a.grid) config.grid = *a.grid;
    const fs::path out_dir = a.out ? *a.out : config.output_dir;

    std::vector<int> lambdas = a.lambdas.empty() ? std::vector<int>{config.lambda} : a.lambdas;
    std::vector<double> horizons =
        a.horizons.empty() ? std::vector<double>{config.horizon} : a.horizons;

    fs::create_directories(out_dir);
    std::ofstream summary(out_dir / "summary.csv");
    if (!summary) throw ConfigError("cannot write " + (out_dir / "summary.csv").string());
    io::write_summary_header(summary);

    nlohmann::json all = nlohmann::json::array();
    bool any_degenerate = false;
    for (double horizon : horizons) {
        for (int lambda : lambdas) {
            io::ScenarioConfig c = config;
            c.lambda = lambda;
            c.horizon = horizon;
            const sim::Scenario scenario = io::build_scenario(c);
            const sim::Campaign campaign = sim::run_campaign(scenario, a.runs, a.seed, a.threads);
            io::write_summary_row(summary, campaign);
            io::write_summary_row(std::cout, campaign);
            all.push_back(io::campaign_to_json(campaign));
            any_degenerate = any_degenerate || campaign.summary.degenerate;
        }
    }
    io::write_json(out_dir / "campaign.json", all);
    std::printf("wrote %s and %s\n", (out_dir / "campaign.json").string().c_str(),
                (out_dir / "summary.csv").string().c_str());
    if (any_degenerate) {
        std::fprintf(stderr, "every run of at least one campaign failed\n");
        return kExitDegenerate;
    }
    return kExitOk;
}

int cmd_synth(const SynthArgs& a) {
    synth::ProfileParams pp;
    pp.seed = a.seed;
    pp.hours = a.hours;
    pp.dt = a.dt;
    const synth::Profiles profiles = synth::daily_profiles(pp);
    std::vector<std::string> load_header;
    for (std::size_t j = 0; j < pp.load_base.size(); ++j) load_header.push_back("load" + std::to_string(j) + "_mw");
    io::write_table_csv(a.out / "load_profile.csv", load_header, profiles.loads);
    io::write_table_csv(a.out / "wind_forecast.csv", {"farm0_mw"}, profiles.wind_forecast);

    synth::ErrorParams ep;
    ep.seed = a.seed;
    ep.autocorrelation = a.autocorrelation;
    ep.noise_mw = a.noise;
    ep.dt = a.error_dt;
    ep.samples = static_cast<std::size_t>(std::llround(a.error_days * 86400.0 / a.error_dt)) + 1;
    io::write_error_csv(a.out / "wind_error.csv", synth::ar1_error_series(ep));
    std::printf("wrote profiles (%zu rows) and wind errors (%zu rows) to %s\n",
                profiles.loads.size(), ep.samples, a.out.string().c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predictive control of a wind and battery grid via finite-horizon MDPs"};
    app.require_subcommand(1);

    EstimateArgs est;
    CLI::App* estimate = app.add_subcommand("estimate", "Estimate a wind error chain from a CSV");
    estimate->add_option("--input", est.input, "timestamp,forecast_mw,actual_mw CSV")->required();
    estimate->add_option("--bins", est.bins, "number of error bins")->check(CLI::Range(2, 100000));
    estimate->add_option("--interpolate-dt", est.interpolate_dt, "resample to this spacing (s) first");
    estimate->add_option("--out", est.out, "output chain JSON");

    RunArgs run;
    CLI::App* runc = app.add_subcommand("run", "Run receding-horizon campaigns");
    runc->add_option("--config", run.config, "scenario JSON")->required();
    runc->add_option("--grid", run.grid, "grid JSON overriding the scenario's");
    runc->add_option("--lambda", run.lambdas, "discretization level; repeat to sweep")
        ->check(CLI::Range(2, 1000));
    runc->add_option("--horizon-s", run.horizons, "exploration horizon in seconds; repeat to sweep");
    runc->add_option("--runs", run.runs, "runs per setting")->check(CLI::Range(1, 1000000));
    runc->add_option("--seed", run.seed, "seed of the first run");
    runc->add_option("--out", run.out, "output directory");
    runc->add_option("--threads", run.threads, "worker threads, 0 = all cores");

    SynthArgs syn;
    CLI::App* synthc = app.add_subcommand("synth", "Generate synthetic profiles and wind errors");
    synthc->add_option("--seed", syn.seed);
    synthc->add_option("--hours", syn.hours, "profile length");
    synthc->add_option("--dt", syn.dt, "profile spacing (s)");
    synthc->add_option("--out", syn.out, "output directory");
    synthc->add_option("--autocorrelation", syn.autocorrelation, "AR(1) coefficient per error sample");
    synthc->add_option("--noise", syn.noise, "AR(1) innovation std (MW)");
    synthc->add_option("--error-days", syn.error_days, "length of the error series");
    synthc->add_option("--error-dt", syn.error_dt, "error series spacing (s)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*estimate) return cmd_estimate(est);
        if (*runc) return cmd_run(run);
        if (*synthc) return cmd_synth(syn);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const StructuralError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const InfeasibleScheduleError& e) {
        std::fprintf(stderr, "error: day-ahead schedule infeasible at step %zu: %s\n", e.step(), e.what());
        return kExitUsage;
    } catch (const DegenerateDataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDegenerate;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDegenerate;
    }
    return kExitUsage;
}
