#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gridmdp::wind {

/// Wind forecast and actual production on a uniform time grid.
struct ErrorSeries {
    std::vector<double> timestamps;  // s since epoch
    std::vector<double> forecast;    // MW
    std::vector<double> actual;      // MW
    std::vector<double> error;       // actual - forecast, MW

    std::size_t size() const noexcept { return timestamps.size(); }
    double spacing() const;

    /// Builds the series and its error column; throws ConfigError on
    /// unequal lengths or non-uniform spacing.
    static ErrorSeries from_columns(std::vector<double> timestamps, std::vector<double> forecast,
                                    std::vector<double> actual);
};

struct Transition {
    std::size_t state;
    double probability;

    bool operator==(const Transition&) const = default;
};

/**
 * Markov chain over uniformly binned wind forecast errors.
 *
 * Bin i covers [edges[i], edges[i+1]); values outside the edge range clamp to
 * the first or last bin. The representative error of a bin is its midpoint.
 */
class WindDtmc {
public:
    using Matrix = std::vector<std::vector<double>>;
    using CountMatrix = std::vector<std::vector<std::uint64_t>>;

    /// Uniform bins over [lo, hi] with the given transition matrix.
    WindDtmc(double lo, double hi, Matrix trans, CountMatrix counts = {});

    /// Explicit edges and representatives, as loaded from a file.
    WindDtmc(std::vector<double> edges, std::vector<double> rep_value, Matrix trans,
             CountMatrix counts = {});

    static WindDtmc identity(double lo, double hi, std::size_t n_bins);

    std::size_t size() const noexcept { return rep_value_.size(); }
    const std::vector<double>& edges() const noexcept { return edges_; }
    const std::vector<double>& rep_values() const noexcept { return rep_value_; }
    double rep_value(std::size_t s) const { return rep_value_.at(s); }
    const Matrix& trans() const noexcept { return trans_; }
    double probability(std::size_t from, std::size_t to) const { return trans_.at(from).at(to); }
    const CountMatrix& counts() const noexcept { return counts_; }
    double bin_width() const noexcept { return width_; }

    bool operator==(const WindDtmc&) const = default;

private:
    void validate() const;

    std::vector<double> edges_;
    std::vector<double> rep_value_;
    Matrix trans_;
    CountMatrix counts_;
    double width_ = 0.0;
};

/// Linear resampling of forecast and actual onto a finer uniform grid.
ErrorSeries interpolate(const ErrorSeries& series, double target_dt);

/**
 * Maximum-likelihood chain from consecutive error pairs.
 *
 * Bins span the observed error range. Rows never visited as a source get a
 * self-loop. Throws DegenerateDataError when every error is identical.
 */
WindDtmc estimate_dtmc(const ErrorSeries& series, std::size_t n_bins = 41);

std::size_t map_error(const WindDtmc& dtmc, double error);

/// Positive-probability successors in ascending state order.
std::vector<Transition> successors(const WindDtmc& dtmc, std::size_t state);

/// steps + 1 states starting at s0, drawn with an Rng seeded by `seed`.
std::vector<std::size_t> sample_trajectory(const WindDtmc& dtmc, std::size_t s0,
                                           std::size_t steps, std::uint64_t seed);

struct DominanceSummary {
    std::size_t populated_rows = 0;
    std::size_t dominant_rows = 0;
    double fraction() const noexcept {
        return populated_rows == 0 ? 0.0
                                   : static_cast<double>(dominant_rows) /
                                         static_cast<double>(populated_rows);
    }
};

/// Rows with observed transitions whose diagonal exceeds every off-diagonal entry.
DominanceSummary diagonal_dominance(const WindDtmc& dtmc);

}  // namespace gridmdp::wind
