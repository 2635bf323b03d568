#pragma once

// Calibration of the three-curve Hull-White realization: per-day affine inner
// solve for (z1, y), bounded trust-region least squares over theta, error
// metrics, window-length sweep, rolling stability and synthetic data.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mchjm/fdr.hpp"

namespace mchjm {

constexpr double kDayFraction = 1.0 / 252.0;
constexpr int kDaysPerMonth = 21;

struct MarketSnapshot {
    int date = 0;
    std::vector<double> maturities;
    std::array<std::vector<double>, 3> bonds;  // B^0, B^1, B^2 at the maturities
    std::array<double, 2> log_spreads{};

    void validate() const;
    int size() const { return 3 * static_cast<int>(maturities.size()) + 2; }
    double yield(int j, std::size_t k) const;  // -log B / x
};

struct Dataset {
    std::vector<MarketSnapshot> days;  // contiguous dates

    void validate() const;
    int first_date() const { return days.empty() ? 0 : days.front().date; }
    // days [begin, begin + count)
    std::vector<MarketSnapshot> window(std::size_t begin, std::size_t count) const;
};

// Time origin of the realization: z^0 = (date - anchor_date) * day_fraction,
// with the initial log-spreads y^M taken on the anchor date.
struct CalibrationContext {
    int anchor_date = 0;
    double day_fraction = kDayFraction;
    std::array<double, 2> yM{};
};

CalibrationContext context_from(const Dataset& data);

// Yield rows (1/x)(-int_0^x G^j - log B^j(x)) for j = 0, 1, 2, then G^{2+j} - Y^j.
Eigen::VectorXd residual(const MarketSnapshot& snap, const Theta& theta, const Eigen::Vector4d& z1,
                         const Eigen::Vector3d& y, const CalibrationContext& ctx);

struct InnerSolution {
    Eigen::Vector4d z1 = Eigen::Vector4d::Zero();
    Eigen::Vector4d reduced = Eigen::Vector4d::Zero();  // (z^0_1, w0, w1, w2), see HW3Embedding
    Eigen::Vector3d y = Eigen::Vector3d::Zero();
    Eigen::VectorXd residual;
    double residual_norm = 0.0;
    int rank = 0;
    bool rank_deficient = false;
};

InnerSolution inner_solve(const MarketSnapshot& snap, const Theta& theta, const CalibrationContext& ctx);

struct Bounds {
    std::array<double, 8> lo{1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, -1.0, -1.0};
    std::array<double, 8> hi{1.0, 0.5, 1.0, 0.5, 1.0, 0.5, 1.0, 1.0};

    bool contains(const Theta& t) const;
};

struct CalibrationOptions {
    Bounds bounds;
    int max_iterations = 200;
    double ftol = 1e-10;  // relative SSE improvement
    double xtol = 1e-12;  // step length
    std::array<bool, 8> free{true, true, true, true, true, true, true, true};
};

struct DayFit {
    int date = 0;
    Eigen::Vector4d z1 = Eigen::Vector4d::Zero();
    Eigen::Vector4d reduced = Eigen::Vector4d::Zero();
    Eigen::Vector3d y = Eigen::Vector3d::Zero();
    double residual_norm = 0.0;
};

struct CalibrationResult {
    Theta theta;
    std::vector<DayFit> per_day;
    double total_sse = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    bool weakly_identified = false;
    double jacobian_condition = 0.0;
    std::string stop_reason;
    std::vector<double> sse_history;  // accepted iterates
    CalibrationContext context;
};

// Sum over days of the squared inner-solve residual norms.
double total_sse(const std::vector<MarketSnapshot>& snaps, const Theta& theta, const CalibrationContext& ctx);

CalibrationResult outer_calibrate(const std::vector<MarketSnapshot>& snaps, const Theta& theta0,
                                  const CalibrationContext& ctx, const CalibrationOptions& opts = {});

struct ErrorMetrics {
    std::array<double, 3> yield{};   // at window end, per curve
    std::array<double, 2> spread{};  // over the window, per tenor
};

ErrorMetrics error_metrics(const CalibrationResult& result, const std::vector<MarketSnapshot>& snaps);

struct SweepRow {
    int months = 0;
    int days = 0;
    bool skipped = false;
    bool converged = false;
    Theta theta;
    ErrorMetrics errors;
    double sse = 0.0;
};

// Trailing windows of 21*months days ending at dataset day `end_index`.
std::vector<SweepRow> window_sweep(const Dataset& data, const std::vector<int>& months, std::size_t end_index,
                                   const Theta& theta0, const CalibrationOptions& opts = {});

class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StabilityReport {
    std::vector<Theta> thetas;     // per roll
    std::vector<bool> converged;   // per roll
    std::array<double, 8> mean{};  // over converged rolls
    std::array<double, 8> stddev{};
    int excluded = 0;
};

// Windows of 21*window_months days starting at days 0, 1, ..., rolls-1, each
// warm-started from the previous optimum.
StabilityReport stability_analysis(const Dataset& data, int window_months, int rolls, const Theta& theta0,
                                   const CalibrationOptions& opts = {});

struct SynthSpec {
    Theta theta;
    std::array<double, 3> y{0.04, -0.015, 0.01};  // Nelson-Siegel initial curves
    std::array<double, 2> yM{0.001, 0.002};       // initial log-spreads
    int days = 80;
    std::vector<double> maturities;
    double noise_sd = 0.0;
    std::uint64_t seed = 20240917ULL;
    // optional regime change: theta_after governs days >= switch_day
    int switch_day = -1;
    Theta theta_after;
};

std::vector<double> standard_maturities();  // 1M..6M, 9M, 1Y..10Y
Dataset synthesize_market_data(const SynthSpec& spec);

}  // namespace mchjm
