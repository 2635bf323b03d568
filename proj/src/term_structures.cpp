#include "mchjm/term_structures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mchjm {

std::vector<double> make_grid(double x_max, double dx) {
    if (!(dx > 0.0) || !(x_max > 0.0)) throw std::invalid_argument("make_grid: dx and x_max must be positive");
    const double steps = x_max / dx;
    const long n = std::lround(steps);
    if (std::abs(steps - static_cast<double>(n)) > 1e-9 * std::max(1.0, steps))
        throw std::invalid_argument("make_grid: x_max/dx is not an integer");
    std::vector<double> g(static_cast<std::size_t>(n) + 1);
    for (long i = 0; i <= n; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) * dx;
    return g;
}

std::vector<double> default_grid() { return make_grid(10.0, 0.05); }

TenorStructure::TenorStructure(std::vector<double> t) : tenors(std::move(t)) {
    if (tenors.empty()) throw std::invalid_argument("TenorStructure: at least one tenor required");
    for (std::size_t i = 0; i < tenors.size(); ++i) {
        if (!(tenors[i] > 0.0)) throw std::invalid_argument("TenorStructure: tenors must be positive");
        if (i > 0 && !(tenors[i] > tenors[i - 1]))
            throw std::invalid_argument("TenorStructure: tenors must be strictly increasing");
    }
}

void BondQuote::validate() const {
    if (!(maturity > 0.0)) throw std::invalid_argument("BondQuote: maturity must be positive");
    if (!(price > 0.0) || price > 1.5) throw std::invalid_argument("BondQuote: price outside (0, 1.5]");
}

ForwardCurve ForwardCurve::analytic(QEFunction f) {
    ForwardCurve c;
    c.analytic_ = true;
    c.fn_ = std::move(f);
    return c;
}

ForwardCurve ForwardCurve::sampled(std::vector<double> grid, std::vector<double> values, Extrapolation extrap) {
    if (grid.size() < 2 || grid.size() != values.size())
        throw std::invalid_argument("ForwardCurve: grid and values must have equal size >= 2");
    if (grid.front() != 0.0) throw std::invalid_argument("ForwardCurve: grid must start at 0");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(values[i])) throw std::invalid_argument("ForwardCurve: non-finite value");
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw std::invalid_argument("ForwardCurve: grid must be strictly increasing");
    }
    ForwardCurve c;
    c.analytic_ = false;
    c.grid_ = std::move(grid);
    c.values_ = std::move(values);
    c.extrap_ = extrap;
    c.cumulative_.assign(c.grid_.size(), 0.0);
    for (std::size_t i = 1; i < c.grid_.size(); ++i)
        c.cumulative_[i] =
            c.cumulative_[i - 1] + 0.5 * (c.grid_[i] - c.grid_[i - 1]) * (c.values_[i] + c.values_[i - 1]);
    return c;
}

double ForwardCurve::value(double x) const {
    if (analytic_) return fn_(x);
    if (x < 0.0) throw std::domain_error("ForwardCurve: negative maturity");
    if (x >= grid_.back()) {
        if (x > grid_.back() && extrap_ == Extrapolation::Error)
            throw std::domain_error("ForwardCurve: maturity beyond grid (extrapolation disabled)");
        return values_.back();
    }
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid_.begin()) - 1;
    const double w = (x - grid_[i]) / (grid_[i + 1] - grid_[i]);
    return (1.0 - w) * values_[i] + w * values_[i + 1];
}

double ForwardCurve::integral(double x) const {
    if (x < 0.0) throw std::domain_error("ForwardCurve: negative maturity");
    if (analytic_) return mchjm::integral(fn_, 0.0, x);
    if (x >= grid_.back()) {
        if (x > grid_.back() && extrap_ == Extrapolation::Error)
            throw std::domain_error("ForwardCurve: maturity beyond grid (extrapolation disabled)");
        return cumulative_.back() + values_.back() * (x - grid_.back());
    }
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid_.begin()) - 1;
    return cumulative_[i] + 0.5 * (x - grid_[i]) * (values_[i] + value(x));
}

ForwardCurve ForwardCurve::sample(const std::vector<double>& grid, Extrapolation extrap) const {
    if (!analytic_ && grid != grid_) throw std::invalid_argument("ForwardCurve::sample: grid mismatch");
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = value(grid[i]);
    return sampled(grid, std::move(v), extrap);
}

void MultiCurveState::validate() const {
    if (curves.size() != log_spreads.size() + 1)
        throw std::invalid_argument("MultiCurveState: expected m+1 curves for m log-spreads");
}

MultiCurveState add_scaled(const MultiCurveState& a, double c, const MultiCurveState& b) {
    a.validate();
    b.validate();
    if (a.curves.size() != b.curves.size()) throw std::invalid_argument("add_scaled: dimension mismatch");
    MultiCurveState out;
    out.log_spreads.resize(a.log_spreads.size());
    for (std::size_t j = 0; j < a.log_spreads.size(); ++j) out.log_spreads[j] = a.log_spreads[j] + c * b.log_spreads[j];
    for (std::size_t j = 0; j < a.curves.size(); ++j) {
        const auto& ca = a.curves[j];
        const auto& cb = b.curves[j];
        if (ca.is_analytic() && cb.is_analytic()) {
            out.curves.push_back(ForwardCurve::analytic(ca.function() + cb.function() * c));
        } else {
            const auto& g = ca.is_analytic() ? cb.grid() : ca.grid();
            std::vector<double> v(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) v[i] = ca.value(g[i]) + c * cb.value(g[i]);
            const auto ex = ca.is_analytic() ? cb.extrapolation() : ca.extrapolation();
            out.curves.push_back(ForwardCurve::sampled(g, std::move(v), ex));
        }
    }
    return out;
}

MultiCurveState scaled(const MultiCurveState& a, double c) {
    MultiCurveState out;
    out.log_spreads = a.log_spreads;
    for (auto& y : out.log_spreads) y *= c;
    for (const auto& cv : a.curves) {
        if (cv.is_analytic()) {
            out.curves.push_back(ForwardCurve::analytic(cv.function() * c));
        } else {
            std::vector<double> v = cv.values();
            for (auto& x : v) x *= c;
            out.curves.push_back(ForwardCurve::sampled(cv.grid(), std::move(v), cv.extrapolation()));
        }
    }
    return out;
}

MultiCurveState zero_like(const MultiCurveState& like) { return scaled(like, 0.0); }

std::vector<double> flatten(const MultiCurveState& s, const std::vector<double>& grid, bool weighted) {
    std::vector<double> out;
    out.reserve(s.curves.size() * grid.size() + s.log_spreads.size());
    for (const auto& c : s.curves) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double w = 1.0;
            if (weighted) {
                double h = 0.0;
                if (i > 0) h += 0.5 * (grid[i] - grid[i - 1]);
                if (i + 1 < grid.size()) h += 0.5 * (grid[i + 1] - grid[i]);
                w = std::sqrt(h);
            }
            out.push_back(w * c.value(grid[i]));
        }
    }
    for (double y : s.log_spreads) out.push_back(y);
    return out;
}

double sup_norm(const MultiCurveState& s, const std::vector<double>& grid) {
    double m = 0.0;
    for (double v : flatten(s, grid, false)) m = std::max(m, std::abs(v));
    return m;
}

double bond_price(const ForwardCurve& curve, double x) {
    if (x < 0.0) throw std::domain_error("bond_price: negative maturity");
    if (x == 0.0) return 1.0;
    return std::exp(-curve.integral(x));
}

double yield_value(const ForwardCurve& curve, double x) {
    if (!(x > 0.0)) throw std::domain_error("yield_value: maturity must be positive");
    return curve.integral(x) / x;
}

double simple_forward_rate(const ForwardCurve& curve, double T, double delta) {
    if (T < 0.0 || !(delta > 0.0)) throw std::domain_error("simple_forward_rate: need T >= 0, delta > 0");
    // B(T)/B(T+delta) = exp(int_T^{T+delta} r)
    return std::expm1(curve.integral(T + delta) - curve.integral(T)) / delta;
}

double implied_risk_sensitive_rate(const MultiCurveState& state, const TenorStructure& tenors, int j, double T) {
    state.validate();
    if (j < 1 || j > state.m() || j > tenors.m())
        throw std::out_of_range("implied_risk_sensitive_rate: tenor index out of range");
    const double delta = tenors.tenors[static_cast<std::size_t>(j - 1)];
    // 1 + delta L^j(T, T+delta) = S^j B^j(T) / B^0(T + delta)
    const double s = std::exp(state.log_spreads[static_cast<std::size_t>(j - 1)]);
    const double bj = bond_price(state.curves[static_cast<std::size_t>(j)], T);
    const double b0 = bond_price(state.curves[0], T + delta);
    if (b0 == 0.0) throw std::domain_error("implied_risk_sensitive_rate: zero risk-free bond price");
    return (s * bj / b0 - 1.0) / delta;
}

bool spreads_increasing(const MultiCurveState& state) {
    for (std::size_t j = 1; j < state.log_spreads.size(); ++j)
        if (state.log_spreads[j] < state.log_spreads[j - 1]) return false;
    return true;
}

std::vector<double> forward_from_yields(const std::vector<double>& grid, const std::vector<double>& yields) {
    const std::size_t n = grid.size();
    if (n < 3 || yields.size() != n) throw std::invalid_argument("forward_from_yields: need >= 3 matching nodes");
    std::vector<double> g(n), f(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = grid[i] * yields[i];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = grid[i] - grid[i - 1], h1 = grid[i + 1] - grid[i];
        f[i] = (h0 * h0 * (g[i + 1] - g[i]) + h1 * h1 * (g[i] - g[i - 1])) / (h0 * h1 * (h0 + h1));
    }
    const double ha = grid[1] - grid[0], hb = grid[n - 1] - grid[n - 2];
    f[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * ha);
    f[n - 1] = (3.0 * g[n - 1] - 4.0 * g[n - 2] + g[n - 3]) / (2.0 * hb);
    return f;
}

QEFunction nelson_siegel(double y0, double y1, double y2, double a) {
    return QEFunction::constant(y0) + QEFunction::exponential(y1, -a) + QEFunction::exponential(y2, -a, 1);
}

}  // namespace mchjm
