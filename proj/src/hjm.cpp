#include "mchjm/hjm.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mchjm {

// ---------------------------------------------------------------------------
// ScalarField

ScalarField ScalarField::constant(double c) {
    ScalarField f;
    f.kind_ = Kind::Constant;
    f.c0_ = c;
    return f;
}

ScalarField ScalarField::affine(double c0, double c1, int k) {
    if (k < 1) throw std::invalid_argument("ScalarField::affine: log-spread index starts at 1");
    ScalarField f;
    f.kind_ = Kind::AffineLogSpread;
    f.c0_ = c0;
    f.c1_ = c1;
    f.k_ = k;
    return f;
}

ScalarField ScalarField::custom(std::function<double(const MultiCurveState&)> fn) {
    if (!fn) throw std::invalid_argument("ScalarField::custom: empty callable");
    ScalarField f;
    f.kind_ = Kind::Custom;
    f.f_ = std::move(fn);
    return f;
}

bool ScalarField::is_identically_zero() const {
    if (kind_ == Kind::Custom) return false;
    return c0_ == 0.0 && c1_ == 0.0;
}

double ScalarField::evaluate(const MultiCurveState& s) const {
    switch (kind_) {
        case Kind::Constant:
            return c0_;
        case Kind::AffineLogSpread:
            if (k_ > s.m()) throw std::out_of_range("ScalarField: log-spread index beyond state");
            return c0_ + c1_ * s.log_spreads[static_cast<std::size_t>(k_ - 1)];
        case Kind::Custom: {
            const double v = f_(s);
            if (!std::isfinite(v)) throw std::runtime_error("ScalarField: custom field returned non-finite value");
            return v;
        }
    }
    return 0.0;
}

namespace {

double state_scale(const MultiCurveState& s) {
    bool analytic = true;
    std::vector<double> g;
    for (const auto& c : s.curves)
        if (!c.is_analytic()) {
            analytic = false;
            g = c.grid();
            break;
        }
    if (analytic) g = default_grid();
    return sup_norm(s, g);
}

}  // namespace

double ScalarField::derivative(const MultiCurveState& s, const MultiCurveState& v) const {
    switch (kind_) {
        case Kind::Constant:
            return 0.0;
        case Kind::AffineLogSpread:
            return c1_ * v.log_spreads[static_cast<std::size_t>(k_ - 1)];
        case Kind::Custom: {
            const double h = 1e-6 * (1.0 + state_scale(s));
            return (evaluate(add_scaled(s, h, v)) - evaluate(add_scaled(s, -h, v))) / (2.0 * h);
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Specs

void ConstantVolSpec::validate() const {
    if (m < 0 || d < 1) throw std::invalid_argument("ConstantVolSpec: need m >= 0, d >= 1");
    if (static_cast<int>(sigma.size()) != m + 1) throw std::invalid_argument("ConstantVolSpec: sigma must have m+1 rows");
    for (const auto& row : sigma)
        if (static_cast<int>(row.size()) != d) throw std::invalid_argument("ConstantVolSpec: sigma rows must have d entries");
    if (static_cast<int>(beta.size()) != m) throw std::invalid_argument("ConstantVolSpec: beta must have m rows");
    for (const auto& row : beta)
        if (static_cast<int>(row.size()) != d) throw std::invalid_argument("ConstantVolSpec: beta rows must have d entries");
}

void ConstantDirectionVolSpec::validate() const {
    if (m < 0 || d < 1) throw std::invalid_argument("ConstantDirectionVolSpec: need m >= 0, d >= 1");
    auto check = [&](auto& rows, int nrows, const char* what) {
        if (static_cast<int>(rows.size()) != nrows)
            throw std::invalid_argument(std::string("ConstantDirectionVolSpec: wrong row count for ") + what);
        for (const auto& row : rows)
            if (static_cast<int>(row.size()) != d)
                throw std::invalid_argument(std::string("ConstantDirectionVolSpec: wrong column count for ") + what);
    };
    check(lambda, m + 1, "lambda");
    check(phi, m + 1, "phi");
    check(beta, m, "beta");
}

void ConstantDirectionVolSpec::check_nonzero(const MultiCurveState& s) const {
    for (int j = 0; j <= m; ++j)
        for (int i = 0; i < d; ++i) {
            const auto ju = static_cast<std::size_t>(j), iu = static_cast<std::size_t>(i);
            if (!lambda[ju][iu].is_zero() && phi[ju][iu].evaluate(s) == 0.0) {
                std::ostringstream os;
                os << "non-zero condition violated: phi^" << j << "_" << i + 1 << " vanishes at the current state";
                throw std::domain_error(os.str());
            }
        }
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < d; ++i) {
            const auto& b = beta[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            if (!b.is_identically_zero() && b.evaluate(s) == 0.0) {
                std::ostringstream os;
                os << "non-zero condition violated: beta^" << j + 1 << "_" << i + 1 << " vanishes at the current state";
                throw std::domain_error(os.str());
            }
        }
}

int spec_m(const VolatilitySpec& spec) {
    return std::visit([](const auto& s) { return s.m; }, spec);
}

int spec_d(const VolatilitySpec& spec) {
    return std::visit([](const auto& s) { return s.d; }, spec);
}

ConstantDirectionVolSpec as_constant_direction(const ConstantVolSpec& spec) {
    spec.validate();
    ConstantDirectionVolSpec out;
    out.m = spec.m;
    out.d = spec.d;
    out.lambda = spec.sigma;
    out.phi.assign(static_cast<std::size_t>(spec.m + 1),
                   std::vector<ScalarField>(static_cast<std::size_t>(spec.d), ScalarField::constant(1.0)));
    out.beta.resize(static_cast<std::size_t>(spec.m));
    for (int j = 0; j < spec.m; ++j)
        for (int i = 0; i < spec.d; ++i)
            out.beta[static_cast<std::size_t>(j)].push_back(
                ScalarField::constant(spec.beta[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]));
    return out;
}

ConstantVolSpec hull_white_spec(const std::vector<double>& a, const std::vector<double>& sigma,
                                const std::vector<double>& beta) {
    if (a.size() != sigma.size() || a.empty() || beta.size() + 1 != a.size())
        throw std::invalid_argument("hull_white_spec: need m+1 rates/vols and m spread vols");
    ConstantVolSpec s;
    s.m = static_cast<int>(beta.size());
    s.d = 1;
    for (std::size_t j = 0; j < a.size(); ++j) s.sigma.push_back({QEFunction::exponential(sigma[j], -a[j])});
    for (double b : beta) s.beta.push_back({b});
    return s;
}

// ---------------------------------------------------------------------------
// Drifts

namespace {

ConstantDirectionVolSpec to_cdv(const VolatilitySpec& spec) {
    if (const auto* c = std::get_if<ConstantVolSpec>(&spec)) return as_constant_direction(*c);
    const auto& s = std::get<ConstantDirectionVolSpec>(spec);
    s.validate();
    return s;
}

ForwardCurve curve_like(const ForwardCurve& like, const QEFunction& f) {
    if (like.is_analytic()) return ForwardCurve::analytic(f);
    return ForwardCurve::analytic(f).sample(like.grid(), like.extrapolation());
}

// central differences, second-order one-sided at both ends
ForwardCurve derivative_curve(const ForwardCurve& c) {
    if (c.is_analytic()) return ForwardCurve::analytic(derive(c.function()));
    const auto& g = c.grid();
    const auto& v = c.values();
    const std::size_t n = g.size();
    std::vector<double> d(n);
    if (n == 2) {
        d[0] = d[1] = (v[1] - v[0]) / (g[1] - g[0]);
    } else {
        for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (v[i + 1] - v[i - 1]) / (g[i + 1] - g[i - 1]);
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (g[2] - g[0]);
        d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (g[n - 1] - g[n - 3]);
    }
    return ForwardCurve::sampled(g, std::move(d), c.extrapolation());
}

void check_dims(const MultiCurveState& s, int m) {
    s.validate();
    if (s.m() != m) throw std::invalid_argument("state and spec dimensions do not match");
}

}  // namespace

MultiCurveState volatility_field(const MultiCurveState& state, const VolatilitySpec& spec, int i) {
    const auto cd = to_cdv(spec);
    check_dims(state, cd.m);
    if (i < 0 || i >= cd.d) throw std::out_of_range("volatility_field: factor index");
    const auto iu = static_cast<std::size_t>(i);
    MultiCurveState out;
    for (int j = 0; j <= cd.m; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const double phi = cd.lambda[ju][iu].is_zero() ? 0.0 : cd.phi[ju][iu].evaluate(state);
        out.curves.push_back(curve_like(state.curves[ju], cd.lambda[ju][iu] * phi));
    }
    for (int j = 0; j < cd.m; ++j) out.log_spreads.push_back(cd.beta[static_cast<std::size_t>(j)][iu].evaluate(state));
    return out;
}

MultiCurveState ito_drift(const MultiCurveState& state, const VolatilitySpec& spec) {
    const auto cd = to_cdv(spec);
    check_dims(state, cd.m);
    cd.check_nonzero(state);
    MultiCurveState out;
    for (int j = 0; j <= cd.m; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        QEFunction extra;
        for (int i = 0; i < cd.d; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            const auto& lam = cd.lambda[ju][iu];
            if (lam.is_zero()) continue;
            const double phi = cd.phi[ju][iu].evaluate(state);
            // sigma . H sigma
            extra += multiply(lam, integrate_from_zero(lam)) * (phi * phi);
            // - beta . sigma
            if (j >= 1) extra += lam * (-cd.beta[ju - 1][iu].evaluate(state) * phi);
        }
        const ForwardCurve fr = derivative_curve(state.curves[ju]);
        if (fr.is_analytic()) {
            out.curves.push_back(ForwardCurve::analytic(fr.function() + extra));
        } else {
            const ForwardCurve e = curve_like(fr, extra);
            std::vector<double> v = fr.values();
            for (std::size_t k = 0; k < v.size(); ++k) v[k] += e.values()[k];
            out.curves.push_back(ForwardCurve::sampled(fr.grid(), std::move(v), fr.extrapolation()));
        }
    }
    const double br0 = state.curves[0].value(0.0);
    for (int j = 1; j <= cd.m; ++j) {
        double b2 = 0.0;
        for (int i = 0; i < cd.d; ++i) {
            const double b = cd.beta[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(i)].evaluate(state);
            b2 += b * b;
        }
        out.log_spreads.push_back(br0 - state.curves[static_cast<std::size_t>(j)].value(0.0) - 0.5 * b2);
    }
    return out;
}

MultiCurveState stratonovich_drift(const MultiCurveState& state, const VolatilitySpec& spec) {
    MultiCurveState mu = ito_drift(state, spec);
    if (std::holds_alternative<ConstantVolSpec>(spec)) return mu;
    const auto& cd = std::get<ConstantDirectionVolSpec>(spec);
    // mu_hat = mu - 1/2 sum_i d sigma_i [sigma_i]
    for (int i = 0; i < cd.d; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const MultiCurveState si = volatility_field(state, spec, i);
        MultiCurveState corr = zero_like(state);
        bool any = false;
        for (int j = 0; j <= cd.m; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            if (cd.lambda[ju][iu].is_zero()) continue;
            const double dphi = cd.phi[ju][iu].derivative(state, si);
            if (dphi == 0.0) continue;
            corr.curves[ju] = curve_like(state.curves[ju], cd.lambda[ju][iu] * dphi);
            any = true;
        }
        for (int j = 0; j < cd.m; ++j) {
            const double db = cd.beta[static_cast<std::size_t>(j)][iu].derivative(state, si);
            corr.log_spreads[static_cast<std::size_t>(j)] = db;
            if (db != 0.0) any = true;
        }
        if (any) mu = add_scaled(mu, -0.5, corr);
    }
    return mu;
}

// ---------------------------------------------------------------------------
// Simulation

int SimConfig::steps() const {
    const double s = horizon / dt;
    return static_cast<int>(std::lround(s));
}

void SimConfig::validate() const {
    if (!(dt > 0.0) || !(horizon > 0.0)) throw std::invalid_argument("SimConfig: dt and horizon must be positive");
    const double s = horizon / dt;
    if (std::abs(s - std::round(s)) > 1e-9 * std::max(1.0, s))
        throw std::invalid_argument("SimConfig: horizon/dt must be an integer");
    if (n_paths < 1) throw std::invalid_argument("SimConfig: n_paths must be >= 1");
    if (grid.size() < 3 || grid.front() != 0.0) throw std::invalid_argument("SimConfig: grid must start at 0 with >= 3 nodes");
    for (double t : record_times)
        if (t < 0.0 || t > horizon + 1e-12) throw std::invalid_argument("SimConfig: record time outside [0, horizon]");
}

std::vector<int> SimConfig::record_steps() const {
    std::vector<int> out;
    if (record_times.empty()) {
        out.push_back(steps());
        return out;
    }
    for (double t : record_times) {
        const double s = t / dt;
        const long k = std::lround(s);
        if (std::abs(s - static_cast<double>(k)) > 1e-6) throw std::invalid_argument("SimConfig: record time not on the time grid");
        out.push_back(static_cast<int>(k));
    }
    return out;
}

namespace {

std::mt19937_64 path_rng(std::uint64_t seed, int path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), 0x9e3779b9U};
    return std::mt19937_64(seq);
}

void fill_path(std::uint64_t seed, int path, int steps, int d, double dt, double* out) {
    auto rng = path_rng(seed, path);
    std::normal_distribution<double> nd(0.0, 1.0);
    const double sq = std::sqrt(dt);
    for (int k = 0; k < steps * d; ++k) out[k] = sq * nd(rng);
}

}  // namespace

BrownianIncrements generate_increments(int n_paths, int steps, int d, double dt, std::uint64_t seed) {
    if (n_paths < 1 || steps < 1 || d < 1 || !(dt > 0.0)) throw std::invalid_argument("generate_increments: bad sizes");
    BrownianIncrements b;
    b.n_paths = n_paths;
    b.steps = steps;
    b.d = d;
    b.dt = dt;
    b.dw.resize(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(steps) * static_cast<std::size_t>(d));
    for (int p = 0; p < n_paths; ++p)
        fill_path(seed, p, steps, d, dt,
                  b.dw.data() + static_cast<std::size_t>(p) * static_cast<std::size_t>(steps) * static_cast<std::size_t>(d));
    return b;
}

BrownianIncrements BrownianIncrements::coarsen() const {
    if (steps % 2 != 0) throw std::invalid_argument("BrownianIncrements::coarsen: odd step count");
    BrownianIncrements c;
    c.n_paths = n_paths;
    c.steps = steps / 2;
    c.d = d;
    c.dt = 2.0 * dt;
    c.dw.resize(dw.size() / 2);
    for (int p = 0; p < n_paths; ++p)
        for (int k = 0; k < c.steps; ++k)
            for (int i = 0; i < d; ++i)
                c.dw[(static_cast<std::size_t>(p) * static_cast<std::size_t>(c.steps) + static_cast<std::size_t>(k)) *
                         static_cast<std::size_t>(d) +
                     static_cast<std::size_t>(i)] = at(p, 2 * k, i) + at(p, 2 * k + 1, i);
    return c;
}

PathSet simulate_hjm(const MultiCurveState& initial, const VolatilitySpec& spec, const SimConfig& cfg,
                     const BrownianIncrements* increments, const StepObserver& observer) {
    cfg.validate();
    const auto cd = to_cdv(spec);
    check_dims(initial, cd.m);
    const int M = cd.m + 1, d = cd.d, steps = cfg.steps();
    const auto& g = cfg.grid;
    const std::size_t N = g.size();
    if (increments && (increments->steps != steps || increments->d != d || increments->n_paths < cfg.n_paths ||
                       std::abs(increments->dt - cfg.dt) > 1e-15))
        throw std::invalid_argument("simulate_hjm: increments do not match the configuration");

    bool custom = false, constant_fields = true;
    for (const auto& row : cd.phi)
        for (const auto& f : row) {
            custom = custom || f.kind() == ScalarField::Kind::Custom;
            constant_fields = constant_fields && f.kind() == ScalarField::Kind::Constant;
        }
    for (const auto& row : cd.beta)
        for (const auto& f : row) {
            custom = custom || f.kind() == ScalarField::Kind::Custom;
            constant_fields = constant_fields && f.kind() == ScalarField::Kind::Constant;
        }

    // lambda and lambda H lambda on the grid
    std::vector<std::vector<std::vector<double>>> lam(static_cast<std::size_t>(M)), dd(static_cast<std::size_t>(M));
    std::vector<std::vector<bool>> active(static_cast<std::size_t>(M), std::vector<bool>(static_cast<std::size_t>(d)));
    for (int j = 0; j < M; ++j)
        for (int i = 0; i < d; ++i) {
            const auto& l = cd.lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            const QEFunction D = multiply(l, integrate_from_zero(l));
            std::vector<double> lv(N), dv(N);
            for (std::size_t k = 0; k < N; ++k) {
                lv[k] = l(g[k]);
                dv[k] = D(g[k]);
            }
            lam[static_cast<std::size_t>(j)].push_back(std::move(lv));
            dd[static_cast<std::size_t>(j)].push_back(std::move(dv));
            active[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = !l.is_zero();
        }

    std::vector<std::vector<double>> r0(static_cast<std::size_t>(M), std::vector<double>(N));
    for (int j = 0; j < M; ++j)
        for (std::size_t k = 0; k < N; ++k) r0[static_cast<std::size_t>(j)][k] = initial.curves[static_cast<std::size_t>(j)].value(g[k]);

    auto make_state = [&](const std::vector<std::vector<double>>& r, const std::vector<double>& y) {
        MultiCurveState s;
        for (int j = 0; j < M; ++j) s.curves.push_back(ForwardCurve::sampled(g, r[static_cast<std::size_t>(j)], Extrapolation::Flat));
        s.log_spreads = y;
        return s;
    };

    const auto rec_steps = cfg.record_steps();
    PathSet out;
    for (int k : rec_steps) out.times.push_back(k * cfg.dt);
    out.states.resize(static_cast<std::size_t>(cfg.n_paths));
    out.log_bank.resize(static_cast<std::size_t>(cfg.n_paths));
    out.initial.push_back(make_state(r0, initial.log_spreads));

    std::vector<double> own(increments ? 0 : static_cast<std::size_t>(steps) * static_cast<std::size_t>(d));
    std::vector<std::vector<double>> phi(static_cast<std::size_t>(M), std::vector<double>(static_cast<std::size_t>(d)));
    std::vector<std::vector<double>> beta(static_cast<std::size_t>(cd.m), std::vector<double>(static_cast<std::size_t>(d)));
    std::vector<double> fr(N), drift(N);

    for (int p = 0; p < cfg.n_paths; ++p) {
        if (!increments) fill_path(cfg.seed, p, steps, d, cfg.dt, own.data());
        auto dW = [&](int step, int i) {
            return increments ? increments->at(p, step, i)
                              : own[static_cast<std::size_t>(step) * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)];
        };
        std::vector<std::vector<double>> r = r0;
        std::vector<double> y = initial.log_spreads;
        double log_bank = 0.0;
        std::size_t next_rec = 0;
        auto record = [&](int step) {
            while (next_rec < rec_steps.size() && rec_steps[next_rec] == step) {
                out.states[static_cast<std::size_t>(p)].push_back(make_state(r, y));
                out.log_bank[static_cast<std::size_t>(p)].push_back(log_bank);
                ++next_rec;
            }
        };
        auto eval_fields = [&]() {
            MultiCurveState s;
            if (custom) {
                s = make_state(r, y);
            } else {
                s.log_spreads = y;
                s.curves.assign(static_cast<std::size_t>(M), ForwardCurve::analytic(QEFunction()));
            }
            const MultiCurveState* sp = &s;
            cd.check_nonzero(*sp);
            for (int j = 0; j < M; ++j)
                for (int i = 0; i < d; ++i)
                    phi[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
                        active[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]
                            ? cd.phi[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)].evaluate(*sp)
                            : 0.0;
            for (int j = 0; j < cd.m; ++j)
                for (int i = 0; i < d; ++i)
                    beta[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
                        cd.beta[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)].evaluate(*sp);
        };
        if (constant_fields) eval_fields();
        record(0);
        if (observer) observer(p, 0, 0.0, make_state(r, y));
        for (int step = 0; step < steps; ++step) {
            if (!constant_fields) eval_fields();
            const double short0 = r[0][0];
            // spreads use the state at the start of the step
            for (int j = 1; j < M; ++j) {
                const auto bj = beta[static_cast<std::size_t>(j - 1)];
                double b2 = 0.0, diff = 0.0;
                for (int i = 0; i < d; ++i) {
                    b2 += bj[static_cast<std::size_t>(i)] * bj[static_cast<std::size_t>(i)];
                    diff += bj[static_cast<std::size_t>(i)] * dW(step, i);
                }
                y[static_cast<std::size_t>(j - 1)] += (short0 - r[static_cast<std::size_t>(j)][0] - 0.5 * b2) * cfg.dt + diff;
            }
            for (int j = 0; j < M; ++j) {
                auto& rj = r[static_cast<std::size_t>(j)];
                for (std::size_t k = 0; k + 1 < N; ++k) fr[k] = (rj[k + 1] - rj[k]) / (g[k + 1] - g[k]);
                fr[N - 1] = (rj[N - 1] - rj[N - 2]) / (g[N - 1] - g[N - 2]);
                for (std::size_t k = 0; k < N; ++k) drift[k] = fr[k] + cfg.drift_shift;
                for (int i = 0; i < d; ++i) {
                    if (!active[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) continue;
                    const double ph = phi[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
                    const double bphi = j >= 1 ? beta[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(i)] * ph : 0.0;
                    const auto& lv = lam[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
                    const auto& dv = dd[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
                    const double w = ph * dW(step, i);
                    for (std::size_t k = 0; k < N; ++k) drift[k] += ph * ph * dv[k] - bphi * lv[k] + w * lv[k] / cfg.dt;
                }
                for (std::size_t k = 0; k < N; ++k) {
                    rj[k] += drift[k] * cfg.dt;
                    if (!std::isfinite(rj[k])) {
                        std::ostringstream os;
                        os << "simulate_hjm: non-finite forward rate on path " << p << " at step " << step + 1
                           << " (curve " << j << ", x = " << g[k] << ")";
                        throw std::runtime_error(os.str());
                    }
                }
            }
            log_bank += short0 * cfg.dt;
            record(step + 1);
            if (observer) observer(p, step + 1, (step + 1) * cfg.dt, make_state(r, y));
        }
    }
    return out;
}

MartingaleStat martingale_check(const PathSet& paths, int j, double t, double T) {
    const std::size_t n = paths.states.size();
    if (n < 100) throw std::invalid_argument("martingale_check: insufficient paths (< 100)");
    if (t > T) throw std::invalid_argument("martingale_check: need t <= T");
    std::size_t ti = paths.times.size();
    for (std::size_t k = 0; k < paths.times.size(); ++k)
        if (std::abs(paths.times[k] - t) < 1e-9) ti = k;
    if (ti == paths.times.size()) throw std::invalid_argument("martingale_check: time t was not recorded");
    const auto& s0 = paths.initial.at(0);
    if (j < 0 || j > s0.m()) throw std::out_of_range("martingale_check: curve index");
    const auto ju = static_cast<std::size_t>(j);
    MartingaleStat st;
    st.target = bond_price(s0.curves[ju], T);
    if (j >= 1) st.target *= std::exp(s0.log_spreads[ju - 1]);
    // Welford accumulation
    double mean = 0.0, m2 = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const auto& s = paths.states[p][ti];
        double v = bond_price(s.curves[ju], T - t) * std::exp(-paths.log_bank[p][ti]);
        if (j >= 1) v *= std::exp(s.log_spreads[ju - 1]);
        const double delta = v - mean;
        mean += delta / static_cast<double>(p + 1);
        m2 += delta * (v - mean);
    }
    const double nn = static_cast<double>(n);
    st.mean = mean;
    st.stderr_ = std::sqrt(m2 / (nn - 1.0) / nn);
    st.z = st.stderr_ > 1e-15 * std::abs(st.mean) ? (st.mean - st.target) / st.stderr_ : 0.0;
    return st;
}

}  // namespace mchjm
