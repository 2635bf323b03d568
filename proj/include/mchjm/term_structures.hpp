#pragma once

// Multi-curve state: m+1 instantaneous forward curves in the Musiela
// parametrization (index 0 = risk-free) plus m log-spreads.

#include <vector>

#include "mchjm/qe.hpp"

namespace mchjm {

// 0, dx, 2dx, ..., x_max (x_max/dx must be integral within 1e-9)
std::vector<double> make_grid(double x_max, double dx);
std::vector<double> default_grid();  // 0:0.05:10

struct TenorStructure {
    std::vector<double> tenors;  // strictly increasing, positive (years)

    explicit TenorStructure(std::vector<double> t);
    int m() const { return static_cast<int>(tenors.size()); }
};

struct BondQuote {
    double maturity = 0.0;
    double price = 0.0;

    void validate() const;
};

enum class Extrapolation { Error, Flat };

class ForwardCurve {
public:
    ForwardCurve() = default;
    static ForwardCurve analytic(QEFunction f);
    static ForwardCurve sampled(std::vector<double> grid, std::vector<double> values,
                                Extrapolation extrap = Extrapolation::Error);

    bool is_analytic() const { return analytic_; }
    const QEFunction& function() const { return fn_; }
    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    Extrapolation extrapolation() const { return extrap_; }

    double value(double x) const;
    // int_0^x r(u) du: closed form for analytic curves, trapezoid for sampled ones
    double integral(double x) const;
    // sampled copy on the given grid (analytic curves only, or identical grids)
    ForwardCurve sample(const std::vector<double>& grid, Extrapolation extrap = Extrapolation::Flat) const;

private:
    bool analytic_ = true;
    QEFunction fn_;
    std::vector<double> grid_;
    std::vector<double> values_;
    std::vector<double> cumulative_;  // trapezoid integral at nodes
    Extrapolation extrap_ = Extrapolation::Error;
};

struct MultiCurveState {
    std::vector<ForwardCurve> curves;  // m+1
    std::vector<double> log_spreads;   // m

    int m() const { return static_cast<int>(log_spreads.size()); }
    void validate() const;
};

// a + c * b, componentwise; both states must share representation
MultiCurveState add_scaled(const MultiCurveState& a, double c, const MultiCurveState& b);
MultiCurveState scaled(const MultiCurveState& a, double c);
// same shape as `like`, all components zero
MultiCurveState zero_like(const MultiCurveState& like);
// Flatten to a vector: curve values on `grid` (weighted by sqrt of trapezoid
// weights when `weighted`), followed by the log-spreads.
std::vector<double> flatten(const MultiCurveState& s, const std::vector<double>& grid, bool weighted);
double sup_norm(const MultiCurveState& s, const std::vector<double>& grid);

double bond_price(const ForwardCurve& curve, double x);
double yield_value(const ForwardCurve& curve, double x);
double simple_forward_rate(const ForwardCurve& curve, double T, double delta);
// Forward risk-sensitive rate L^j(T, T + delta_j) seen from the state's
// reference date; T is the time to the start of the accrual period.
double implied_risk_sensitive_rate(const MultiCurveState& state, const TenorStructure& tenors, int j,
                                   double T);
// Diagnostic: exp(Y^1) <= ... <= exp(Y^m)
bool spreads_increasing(const MultiCurveState& state);
// Rebuild forward values from yields y(x) on a grid via d(x y)/dx.
std::vector<double> forward_from_yields(const std::vector<double>& grid, const std::vector<double>& yields);

// Nelson-Siegel curve y0 + y1 e^{-a x} + y2 x e^{-a x}
QEFunction nelson_siegel(double y0, double y1, double y2, double a);

}  // namespace mchjm
