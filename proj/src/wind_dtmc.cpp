#include "gridmdp/wind_dtmc.hpp"

#include "gridmdp/errors.hpp"
#include "gridmdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gridmdp::wind {

namespace {

std::vector<double> uniform_edges(double lo, double hi, std::size_t n_bins) {
    std::vector<double> edges(n_bins + 1);
    const double width = (hi - lo) / static_cast<double>(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i) edges[i] = lo + width * static_cast<double>(i);
    edges[n_bins] = hi;
    return edges;
}

std::vector<double> midpoints(const std::vector<double>& edges) {
    std::vector<double> mids(edges.size() - 1);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) mids[i] = 0.5 * (edges[i] + edges[i + 1]);
    return mids;
}

}  // namespace

double ErrorSeries::spacing() const {
    if (timestamps.size() < 2) throw ConfigError("series needs two samples to define spacing");
    return timestamps[1] - timestamps[0];
}

ErrorSeries ErrorSeries::from_columns(std::vector<double> timestamps, std::vector<double> forecast,
                                      std::vector<double> actual) {
    if (timestamps.size() != forecast.size() || timestamps.size() != actual.size()) {
        throw ConfigError("error series columns differ in length");
    }
    if (timestamps.size() >= 2) {
        const double step = timestamps[1] - timestamps[0];
        if (!(step > 0.0)) throw ConfigError("timestamps must increase");
        for (std::size_t k = 2; k < timestamps.size(); ++k) {
            if (std::abs((timestamps[k] - timestamps[k - 1]) - step) > 1e-6 * step) {
                throw ConfigError("non-uniform timestamp spacing at row " + std::to_string(k));
            }
        }
    }
    ErrorSeries s;
    s.error.resize(timestamps.size());
    for (std::size_t k = 0; k < timestamps.size(); ++k) s.error[k] = actual[k] - forecast[k];
    s.timestamps = std::move(timestamps);
    s.forecast = std::move(forecast);
    s.actual = std::move(actual);
    return s;
}

WindDtmc::WindDtmc(double lo, double hi, Matrix trans, CountMatrix counts)
    : trans_(std::move(trans)), counts_(std::move(counts)) {
    if (!(hi > lo)) throw DegenerateDataError("bin range must have positive width");
    edges_ = uniform_edges(lo, hi, trans_.size());
    rep_value_ = midpoints(edges_);
    width_ = (hi - lo) / static_cast<double>(trans_.size());
    validate();
}

WindDtmc::WindDtmc(std::vector<double> edges, std::vector<double> rep_value, Matrix trans,
                   CountMatrix counts)
    : edges_(std::move(edges)),
      rep_value_(std::move(rep_value)),
      trans_(std::move(trans)),
      counts_(std::move(counts)) {
    if (edges_.size() < 2) throw ConfigError("need at least two bin edges");
    width_ = (edges_.back() - edges_.front()) / static_cast<double>(edges_.size() - 1);
    validate();
}

WindDtmc WindDtmc::identity(double lo, double hi, std::size_t n_bins) {
    Matrix eye(n_bins, std::vector<double>(n_bins, 0.0));
    for (std::size_t i = 0; i < n_bins; ++i) eye[i][i] = 1.0;
    return WindDtmc(lo, hi, std::move(eye));
}

void WindDtmc::validate() const {
    const std::size_t n = trans_.size();
    if (n < 1) throw ConfigError("chain needs at least one state");
    if (edges_.size() != n + 1) throw ConfigError("edge count must be state count + 1");
    if (rep_value_.size() != n) throw ConfigError("one representative value per state required");
    for (std::size_t i = 0; i < n; ++i) {
        const double w = edges_[i + 1] - edges_[i];
        if (!(w > 0.0)) throw ConfigError("bin edges must be strictly increasing");
        if (std::abs(w - width_) > 1e-9 * std::max(1.0, std::abs(width_))) {
            throw ConfigError("bins must have uniform width");
        }
        if (!(rep_value_[i] > edges_[i] && rep_value_[i] < edges_[i + 1])) {
            throw ConfigError("representative of bin " + std::to_string(i) +
                              " lies outside the bin");
        }
        if (trans_[i].size() != n) throw ConfigError("transition matrix must be square");
        double sum = 0.0;
        for (double p : trans_[i]) {
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("transition probability outside [0,1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw ConfigError("row " + std::to_string(i) + " of transition matrix sums to " +
                              std::to_string(sum));
        }
    }
    if (!counts_.empty()) {
        if (counts_.size() != n) throw ConfigError("count matrix must match chain size");
        for (const auto& row : counts_) {
            if (row.size() != n) throw ConfigError("count matrix must be square");
        }
    }
}

ErrorSeries interpolate(const ErrorSeries& series, double target_dt) {
    if (!(target_dt > 0.0)) throw std::invalid_argument("target_dt must be positive");
    if (series.size() < 2) return series;
    const double source_dt = series.spacing();
    const double ratio = source_dt / target_dt;
    const double factor_rounded = std::round(ratio);
    if (factor_rounded < 1.0 || std::abs(ratio - factor_rounded) > 1e-9 * ratio) {
        throw std::invalid_argument("target_dt " + std::to_string(target_dt) +
                                    " s does not divide source spacing " +
                                    std::to_string(source_dt) + " s");
    }
    const auto factor = static_cast<std::size_t>(factor_rounded);
    if (factor == 1) return series;

    const std::size_t n_out = (series.size() - 1) * factor + 1;
    std::vector<double> ts(n_out), fc(n_out), act(n_out);
    for (std::size_t k = 0; k + 1 < series.size(); ++k) {
        for (std::size_t j = 0; j < factor; ++j) {
            const std::size_t idx = k * factor + j;
            const double frac = static_cast<double>(j) / static_cast<double>(factor);
            ts[idx] = series.timestamps[0] + target_dt * static_cast<double>(idx);
            fc[idx] = j == 0 ? series.forecast[k]
                             : series.forecast[k] + frac * (series.forecast[k + 1] - series.forecast[k]);
            act[idx] = j == 0 ? series.actual[k]
                              : series.actual[k] + frac * (series.actual[k + 1] - series.actual[k]);
        }
    }
    ts[n_out - 1] = series.timestamps.back();
    fc[n_out - 1] = series.forecast.back();
    act[n_out - 1] = series.actual.back();

    ErrorSeries out;
    out.error.resize(n_out);
    for (std::size_t k = 0; k < n_out; ++k) out.error[k] = act[k] - fc[k];
    out.timestamps = std::move(ts);
    out.forecast = std::move(fc);
    out.actual = std::move(act);
    return out;
}

std::size_t map_error(const WindDtmc& dtmc, double error) {
    const auto& edges = dtmc.edges();
    const std::size_t n = dtmc.size();
    if (!(error >= edges.front())) return 0;  // also catches NaN
    if (error >= edges.back()) return n - 1;
    auto guess = static_cast<std::size_t>((error - edges.front()) / dtmc.bin_width());
    std::size_t i = std::min(guess, n - 1);
    // floating point may put the guess one bin off near an edge
    while (i + 1 < n && error >= edges[i + 1]) ++i;
    while (i > 0 && error < edges[i]) --i;
    return i;
}

WindDtmc estimate_dtmc(const ErrorSeries& series, std::size_t n_bins) {
    if (series.size() < 2) throw std::invalid_argument("need at least two samples to estimate");
    if (n_bins < 2) throw std::invalid_argument("need at least two bins");
    const auto [min_it, max_it] = std::minmax_element(series.error.begin(), series.error.end());
    const double lo = *min_it;
    const double hi = *max_it;
    if (!(hi > lo)) throw DegenerateDataError("wind error series is constant; no bin range");

    // Map through a throwaway identity chain with the final bin layout.
    const WindDtmc layout = WindDtmc::identity(lo, hi, n_bins);
    std::vector<std::size_t> states(series.size());
    for (std::size_t k = 0; k < series.size(); ++k) states[k] = map_error(layout, series.error[k]);

    WindDtmc::CountMatrix counts(n_bins, std::vector<std::uint64_t>(n_bins, 0));
    for (std::size_t k = 0; k + 1 < states.size(); ++k) ++counts[states[k]][states[k + 1]];

    WindDtmc::Matrix trans(n_bins, std::vector<double>(n_bins, 0.0));
    for (std::size_t i = 0; i < n_bins; ++i) {
        const std::uint64_t total = std::accumulate(counts[i].begin(), counts[i].end(),
                                                    std::uint64_t{0});
        if (total == 0) {
            trans[i][i] = 1.0;
            continue;
        }
        for (std::size_t j = 0; j < n_bins; ++j) {
            trans[i][j] = static_cast<double>(counts[i][j]) / static_cast<double>(total);
        }
    }
    return WindDtmc(lo, hi, std::move(trans), std::move(counts));
}

std::vector<Transition> successors(const WindDtmc& dtmc, std::size_t state) {
    const auto& row = dtmc.trans().at(state);
    std::vector<Transition> out;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] > 0.0) out.push_back({j, row[j]});
    }
    return out;
}

std::vector<std::size_t> sample_trajectory(const WindDtmc& dtmc, std::size_t s0,
                                           std::size_t steps, std::uint64_t seed) {
    if (s0 >= dtmc.size()) throw std::out_of_range("initial wind state out of range");
    Rng rng(seed);
    std::vector<std::size_t> path;
    path.reserve(steps + 1);
    path.push_back(s0);
    std::size_t cur = s0;
    for (std::size_t k = 0; k < steps; ++k) {
        const auto& row = dtmc.trans()[cur];
        const double u = rng.uniform();
        double cumulative = 0.0;
        std::size_t next = cur;
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] <= 0.0) continue;
            cumulative += row[j];
            next = j;  // last positive entry wins if rounding leaves u uncovered
            if (u < cumulative) break;
        }
        cur = next;
        path.push_back(cur);
    }
    return path;
}

DominanceSummary diagonal_dominance(const WindDtmc& dtmc) {
    DominanceSummary summary;
    const std::size_t n = dtmc.size();
    for (std::size_t i = 0; i < n; ++i) {
        bool populated = false;
        if (!dtmc.counts().empty()) {
            populated = std::any_of(dtmc.counts()[i].begin(), dtmc.counts()[i].end(),
                                    [](std::uint64_t c) { return c > 0; });
        } else {
            populated = true;
        }
        if (!populated) continue;
        ++summary.populated_rows;
        double off_max = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) off_max = std::max(off_max, dtmc.trans()[i][j]);
        }
        if (dtmc.trans()[i][i] > off_max) ++summary.dominant_rows;
    }
    return summary;
}

}  // namespace gridmdp::wind
