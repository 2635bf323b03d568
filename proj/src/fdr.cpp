#include "mchjm/fdr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>

namespace mchjm {

void FDRRealization::values(const Eigen::VectorXd& z, const std::vector<double>& grid,
                            std::vector<std::vector<double>>& curves, std::vector<double>& spreads) const {
    const MultiCurveState s = embed(z);
    curves.assign(s.curves.size(), std::vector<double>(grid.size()));
    for (std::size_t j = 0; j < s.curves.size(); ++j)
        for (std::size_t i = 0; i < grid.size(); ++i) curves[j][i] = s.curves[j].value(grid[i]);
    spreads = s.log_spreads;
}

namespace {

void require_analytic(const MultiCurveState& s, int m, const char* who) {
    s.validate();
    if (s.m() != m) throw std::invalid_argument(std::string(who) + ": initial state has wrong number of curves");
    for (const auto& c : s.curves)
        if (!c.is_analytic()) throw std::invalid_argument(std::string(who) + ": initial curves must be analytic");
}

// Shared, immutable data of a constant-volatility realization.
struct ConstVolData {
    int m = 0, d = 0, n = 0;
    std::vector<int> offset, nfac;           // block start and n_i per factor
    std::vector<AnnihilatorPoly> ann;
    std::vector<QEFunction> r, P, betaS, I;  // per curve / spread
    std::vector<double> yM, beta_sq;
    std::vector<std::vector<std::vector<QEFunction>>> Fk;  // [j][i][k] = F^k sigma^j_i
    std::vector<std::vector<std::vector<double>>> spread_lin;  // [j][i][k], k >= 1
    std::vector<std::vector<double>> beta;
};

}  // namespace

FDRRealization build_constant_vol_fdr(const ConstantVolSpec& spec, const MultiCurveState& initial) {
    spec.validate();
    require_analytic(initial, spec.m, "build_constant_vol_fdr");
    auto D = std::make_shared<ConstVolData>();
    D->m = spec.m;
    D->d = spec.d;
    const auto M = static_cast<std::size_t>(spec.m);
    const auto Dn = static_cast<std::size_t>(spec.d);

    int off = 1;
    for (std::size_t i = 0; i < Dn; ++i) {
        std::vector<QEFunction> fs;
        bool any = false;
        for (std::size_t j = 0; j <= M; ++j) {
            fs.push_back(spec.sigma[j][i]);
            any = any || !spec.sigma[j][i].is_zero();
        }
        AnnihilatorPoly a;
        if (any) {
            a = common_annihilator(fs);
        } else {
            a.coeffs = {1.0};
            a.degree = 0;
        }
        D->ann.push_back(a);
        D->offset.push_back(off);
        D->nfac.push_back(a.degree);
        off += 1 + a.degree;
    }
    D->n = off;

    D->Fk.assign(M + 1, std::vector<std::vector<QEFunction>>(Dn));
    std::vector<std::vector<QEFunction>> S(M + 1, std::vector<QEFunction>(Dn));
    for (std::size_t j = 0; j <= M; ++j) {
        D->r.push_back(initial.curves[j].function());
        QEFunction p;
        for (std::size_t i = 0; i < Dn; ++i) {
            S[j][i] = integrate_from_zero(spec.sigma[j][i]);
            p += S[j][i] * S[j][i] * 0.5;
            QEFunction f = spec.sigma[j][i];
            for (int k = 0; k <= D->nfac[i]; ++k) {
                D->Fk[j][i].push_back(f);
                f = derive(f);
            }
        }
        D->P.push_back(p);
    }
    D->beta = spec.beta;
    D->betaS.assign(M + 1, QEFunction());
    D->I.assign(M + 1, QEFunction());
    D->beta_sq.assign(M + 1, 0.0);
    D->yM.assign(M + 1, 0.0);
    D->spread_lin.assign(M + 1, std::vector<std::vector<double>>(Dn));
    for (std::size_t j = 1; j <= M; ++j) {
        D->yM[j] = initial.log_spreads[j - 1];
        for (std::size_t i = 0; i < Dn; ++i) {
            const double b = spec.beta[j - 1][i];
            D->betaS[j] += S[j][i] * b;
            D->beta_sq[j] += b * b;
            D->spread_lin[j][i].assign(static_cast<std::size_t>(D->nfac[i]) + 1, 0.0);
            for (int k = 1; k <= D->nfac[i]; ++k) {
                const auto km = static_cast<std::size_t>(k - 1);
                D->spread_lin[j][i][static_cast<std::size_t>(k)] =
                    eval_at_zero(D->Fk[0][i][km]) - eval_at_zero(D->Fk[j][i][km]);
            }
        }
        D->I[j] = integrate_from_zero(D->r[0] - D->r[j] + D->P[0] - D->P[j] + D->betaS[j]);
    }

    FDRRealization out;
    out.kind = "constant_vol";
    out.n = D->n;
    out.m = D->m;
    out.d = D->d;
    out.annihilators = D->ann;
    out.embed = [D](const Eigen::VectorXd& z) {
        if (z.size() != D->n) throw std::invalid_argument("constant-vol embed: wrong state dimension");
        const double t = z[0];
        MultiCurveState s;
        for (std::size_t j = 0; j <= static_cast<std::size_t>(D->m); ++j) {
            QEFunction f = D->r[j].shift(t) + D->P[j].shift(t) - D->P[j];
            if (j > 0) f += D->betaS[j] - D->betaS[j].shift(t);
            for (std::size_t i = 0; i < static_cast<std::size_t>(D->d); ++i)
                for (int k = 0; k <= D->nfac[i]; ++k)
                    f += D->Fk[j][i][static_cast<std::size_t>(k)] * z[D->offset[i] + k];
            s.curves.push_back(ForwardCurve::analytic(f));
            if (j > 0) {
                double y = D->yM[j] + D->I[j](t) - 0.5 * D->beta_sq[j] * t;
                for (std::size_t i = 0; i < static_cast<std::size_t>(D->d); ++i) {
                    y += D->beta[j - 1][i] * z[D->offset[i]];
                    for (int k = 1; k <= D->nfac[i]; ++k)
                        y += D->spread_lin[j][i][static_cast<std::size_t>(k)] * z[D->offset[i] + k];
                }
                s.log_spreads.push_back(y);
            }
        }
        return s;
    };
    out.drift = [D](const Eigen::VectorXd& z) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(D->n);
        a[0] = 1.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(D->d); ++i) {
            const int o = D->offset[i], ni = D->nfac[i];
            for (int k = 1; k <= ni; ++k)
                a[o + k] = z[o + k - 1] - D->ann[i].coeffs[static_cast<std::size_t>(k - 1)] * z[o + ni];
        }
        return a;
    };
    out.diffusion = [D](const Eigen::VectorXd&) {
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(D->n, D->d);
        for (int i = 0; i < D->d; ++i) b(D->offset[static_cast<std::size_t>(i)], i) = 1.0;
        return b;
    };
    out.initial_point = out.embed(Eigen::VectorXd::Zero(D->n));
    return out;
}

// ---------------------------------------------------------------------------
// Three-curve Hull-White

Theta Theta::from_vector(const std::vector<double>& v) {
    if (v.size() != 8) throw std::invalid_argument("Theta: expected 8 parameters");
    Theta t;
    t.a0 = v[0];
    t.sigma0 = v[1];
    t.a1 = v[2];
    t.sigma1 = v[3];
    t.a2 = v[4];
    t.sigma2 = v[5];
    t.beta1 = v[6];
    t.beta2 = v[7];
    return t;
}

void Theta::validate() const {
    for (double x : to_vector())
        if (!std::isfinite(x)) throw std::invalid_argument("Theta: non-finite parameter");
    for (int j = 0; j < 3; ++j) {
        if (!(a(j) > 0.0)) throw std::invalid_argument("Theta: mean-reversion rates must be positive");
        if (!(sigma(j) > 0.0)) throw std::invalid_argument("Theta: volatilities must be positive");
    }
    if (std::abs(a0 - a1) < 1e-6 || std::abs(a0 - a2) < 1e-6 || std::abs(a1 - a2) < 1e-6)
        throw std::invalid_argument("degenerate annihilator: mean-reversion rates must differ by at least 1e-6");
}

ConstantVolSpec Theta::spec() const { return hull_white_spec({a0, a1, a2}, {sigma0, sigma1, sigma2}, {beta1, beta2}); }

namespace {

// (1 - e^{-a x}) / a and int_0^x u e^{-a u} du
double e1(double a, double x) { return -std::expm1(-a * x) / a; }
double e2(double a, double x) { return (1.0 - std::exp(-a * x) * (1.0 + a * x)) / (a * a); }

}  // namespace

HW3Embedding::HW3Embedding(const Theta& theta, const std::array<double, 2>& yM) : th_(theta), yM_(yM) {
    th_.validate();
}

double HW3Embedding::reduced_coordinate(int j, const double* z) const {
    const double a = th_.a(j);
    return z[1] - a * z[2] + a * a * z[3] - a * a * a * z[4];
}

double HW3Embedding::forward_reduced(int j, double t, double w, const double* y, double x) const {
    const double a = th_.a(j), s = th_.sigma(j), b = th_.beta(j);
    const double ex = std::exp(-a * x), et = std::exp(-a * t);
    const double sa = s / a;
    return y[0] + y[1] * ex * et + y[2] * (x + t) * ex * et + s * ex * w +
           0.5 * sa * sa * ex * ex * std::expm1(-2.0 * a * t) - sa * (sa - b) * ex * std::expm1(-a * t);
}

double HW3Embedding::forward_integral_reduced(int j, double t, double w, const double* y, double x) const {
    const double a = th_.a(j), s = th_.sigma(j), b = th_.beta(j);
    const double et = std::exp(-a * t);
    const double sa = s / a;
    const double E1 = e1(a, x);
    return y[0] * x + y[1] * et * E1 + y[2] * et * (e2(a, x) + t * E1) + s * w * E1 +
           0.5 * sa * sa * std::expm1(-2.0 * a * t) * e1(2.0 * a, x) - sa * (sa - b) * std::expm1(-a * t) * E1;
}

double HW3Embedding::log_spread_reduced(int j, double t, double b, const double* w, const double* y) const {
    if (j != 1 && j != 2) throw std::out_of_range("HW3Embedding::log_spread: j must be 1 or 2");
    const double a0 = th_.a0, s0 = th_.sigma0;
    const double aj = th_.a(j), sj = th_.sigma(j), bj = th_.beta(j);
    auto int_r = [&](double a) { return y[0] * t + y[1] * e1(a, t) + y[2] * e2(a, t); };
    auto half_s2 = [&](double a, double s) {
        const double sa = s / a;
        return 0.5 * sa * sa * (t - 2.0 * e1(a, t) + e1(2.0 * a, t));
    };
    // z^1 - a z^2 + a^2 z^3 = (b - w(a)) / a
    const double lin = bj * b + s0 * (b - w[0]) / a0 - sj * (b - w[j]) / aj;
    return yM_[static_cast<std::size_t>(j - 1)] + int_r(a0) - int_r(aj) + lin + half_s2(a0, s0) - half_s2(aj, sj) +
           (sj / aj) * bj * (t - e1(aj, t)) - 0.5 * bj * bj * t;
}

std::array<double, 5> HW3Embedding::state_from_reduced(double t, double b, const double* w) const {
    // rows (1, -a, a^2, -a^3) for the three curves plus (1, 0, 0, 0)
    Eigen::Matrix4d T;
    Eigen::Vector4d rhs;
    T.row(0) << 1.0, 0.0, 0.0, 0.0;
    rhs[0] = b;
    for (int j = 0; j < 3; ++j) {
        const double a = th_.a(j);
        T.row(j + 1) << 1.0, -a, a * a, -a * a * a;
        rhs[j + 1] = w[j];
    }
    const Eigen::Vector4d z = T.fullPivLu().solve(rhs);
    return {t, z[0], z[1], z[2], z[3]};
}

double HW3Embedding::forward(int j, const double* z, const double* y, double x) const {
    return forward_reduced(j, z[0], reduced_coordinate(j, z), y, x);
}

double HW3Embedding::forward_integral(int j, const double* z, const double* y, double x) const {
    return forward_integral_reduced(j, z[0], reduced_coordinate(j, z), y, x);
}

double HW3Embedding::log_spread(int j, const double* z, const double* y) const {
    const double w[3] = {reduced_coordinate(0, z), reduced_coordinate(1, z), reduced_coordinate(2, z)};
    return log_spread_reduced(j, z[0], z[1], w, y);
}

FDRRealization build_hw3_fdr(const Theta& theta, const std::array<double, 3>& y, const std::array<double, 2>& yM) {
    auto E = std::make_shared<HW3Embedding>(theta, yM);
    const double a0 = theta.a0, a1 = theta.a1, a2 = theta.a2;
    // M(g) = (g + a0)(g + a1)(g + a2), ascending coefficients
    const std::vector<double> c = {a0 * a1 * a2, a0 * a1 + a0 * a2 + a1 * a2, a0 + a1 + a2, 1.0};

    FDRRealization out;
    out.kind = "hw3";
    out.n = 5;
    out.m = 2;
    out.d = 1;
    out.theta = theta.to_vector();
    AnnihilatorPoly M;
    M.coeffs = c;
    M.degree = 3;
    out.annihilators = {M};
    out.embed = [E, y](const Eigen::VectorXd& z) {
        if (z.size() != 5) throw std::invalid_argument("hw3 embed: state must have 5 coordinates");
        const Theta& th = E->theta();
        const double t = z[0];
        const double w_base[4] = {z[1], z[2], z[3], z[4]};
        MultiCurveState s;
        for (int j = 0; j < 3; ++j) {
            const double a = th.a(j), sg = th.sigma(j), b = th.beta(j), sa = sg / a;
            const double w = w_base[0] - a * w_base[1] + a * a * w_base[2] - a * a * a * w_base[3];
            QEFunction f = nelson_siegel(y[0], y[1], y[2], a).shift(t) + QEFunction::exponential(sg * w, -a) +
                           QEFunction::exponential(0.5 * sa * sa * std::expm1(-2.0 * a * t), -2.0 * a) -
                           QEFunction::exponential(sa * (sa - b) * std::expm1(-a * t), -a);
            s.curves.push_back(ForwardCurve::analytic(f));
        }
        s.log_spreads = {E->log_spread(1, z.data(), y.data()), E->log_spread(2, z.data(), y.data())};
        return s;
    };
    out.drift = [c](const Eigen::VectorXd& z) {
        Eigen::VectorXd a(5);
        a << 1.0, 0.0, z[1] - c[0] * z[4], z[2] - c[1] * z[4], z[3] - c[2] * z[4];
        return a;
    };
    out.diffusion = [](const Eigen::VectorXd&) {
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(5, 1);
        b(1, 0) = 1.0;
        return b;
    };
    out.initial_point = out.embed(Eigen::VectorXd::Zero(5));
    return out;
}

// ---------------------------------------------------------------------------
// Constant-direction example (m = 2, d = 3)

ConstantDirectionVolSpec cdv_example_spec(const CDVParams& p) {
    ConstantDirectionVolSpec s;
    s.m = 2;
    s.d = 3;
    s.lambda.assign(3, std::vector<QEFunction>(3));
    s.phi.assign(3, std::vector<ScalarField>(3, ScalarField::constant(0.0)));
    for (std::size_t j = 0; j < 3; ++j) {
        s.lambda[j][j] = QEFunction::exponential(p.sigma[j], -p.a[j]);
        s.phi[j][j] = ScalarField::constant(1.0);
    }
    s.beta.assign(2, std::vector<ScalarField>(3, ScalarField::constant(0.0)));
    s.beta[0][0] = ScalarField::constant(p.beta11);
    s.beta[0][1] = ScalarField::affine(0.0, p.beta12, 1);
    s.beta[1][0] = ScalarField::constant(p.beta21);
    s.beta[1][2] = ScalarField::affine(0.0, p.beta23, 2);
    return s;
}

namespace {

struct CDVData {
    CDVParams p;
    std::array<QEFunction, 3> r, lambda, Dj, FDj;
    std::array<AnnihilatorPoly, 3> ann_l, ann_d;
    std::array<double, 3> l0{}, d0{}, fd0{};
    std::array<QEFunction, 3> I;  // int_0 (r^0 - r^j)
    std::array<double, 3> yM{};

    double spread(int j, const Eigen::VectorXd& z) const {
        return yM[static_cast<std::size_t>(j)] + I[static_cast<std::size_t>(j)](z[0]) + z[j];
    }
    // B G^j without the initial-curve part
    double boundary(int j, const Eigen::VectorXd& z) const {
        const auto u = static_cast<std::size_t>(j);
        return z[3 + j] * l0[u] + z[6 + 2 * j] * d0[u] + z[7 + 2 * j] * fd0[u];
    }
};

}  // namespace

FDRRealization build_cdv_example_fdr(const CDVParams& p, const MultiCurveState& initial) {
    require_analytic(initial, 2, "build_cdv_example_fdr");
    for (std::size_t j = 0; j < 3; ++j)
        if (!(p.a[j] > 0.0) || p.sigma[j] == 0.0 || !std::isfinite(p.sigma[j]))
            throw std::invalid_argument("build_cdv_example_fdr: need a^j > 0 and sigma^j != 0");
    if (initial.log_spreads[0] == 0.0 || initial.log_spreads[1] == 0.0)
        throw std::domain_error("build_cdv_example_fdr: initial log-spreads must be nonzero");

    auto D = std::make_shared<CDVData>();
    D->p = p;
    for (std::size_t j = 0; j < 3; ++j) {
        D->r[j] = initial.curves[j].function();
        D->lambda[j] = QEFunction::exponential(p.sigma[j], -p.a[j]);
        D->Dj[j] = D->lambda[j] * integrate_from_zero(D->lambda[j]);
        D->FDj[j] = derive(D->Dj[j]);
        D->ann_l[j] = annihilator(D->lambda[j]);
        D->ann_d[j] = annihilator(D->Dj[j]);
        if (D->ann_l[j].degree != 1 || D->ann_d[j].degree != 2)
            throw std::domain_error("build_cdv_example_fdr: unexpected annihilator degree");
        D->l0[j] = eval_at_zero(D->lambda[j]);
        D->d0[j] = eval_at_zero(D->Dj[j]);
        D->fd0[j] = eval_at_zero(D->FDj[j]);
        D->I[j] = integrate_from_zero(D->r[0] - D->r[j]);
        if (j > 0) D->yM[j] = initial.log_spreads[j - 1];
    }

    FDRRealization out;
    out.kind = "cdv_example";
    out.n = 12;
    out.m = 2;
    out.d = 3;
    out.theta = {p.sigma[0], p.a[0], p.sigma[1], p.a[1], p.sigma[2], p.a[2], p.beta11, p.beta12, p.beta21, p.beta23};
    for (std::size_t j = 0; j < 3; ++j) {
        out.annihilators.push_back(D->ann_l[j]);
        out.annihilators.push_back(D->ann_d[j]);
    }
    out.embed = [D](const Eigen::VectorXd& z) {
        if (z.size() != 12) throw std::invalid_argument("cdv embed: state must have 12 coordinates");
        MultiCurveState s;
        for (int j = 0; j < 3; ++j) {
            const auto u = static_cast<std::size_t>(j);
            QEFunction f = D->r[u].shift(z[0]) + D->lambda[u] * z[3 + j] + D->Dj[u] * z[6 + 2 * j] +
                           D->FDj[u] * z[7 + 2 * j];
            s.curves.push_back(ForwardCurve::analytic(f));
        }
        s.log_spreads = {D->spread(1, z), D->spread(2, z)};
        return s;
    };
    out.drift = [D](const Eigen::VectorXd& z) {
        const CDVParams& q = D->p;
        Eigen::VectorXd a = Eigen::VectorXd::Zero(12);
        a[0] = 1.0;
        const double Y1 = D->spread(1, z), Y2 = D->spread(2, z);
        const double b0 = D->boundary(0, z);
        a[1] = b0 - D->boundary(1, z) - 0.5 * q.beta11 * q.beta11 - 0.5 * q.beta12 * q.beta12 * Y1 * (Y1 + 1.0);
        a[2] = b0 - D->boundary(2, z) - 0.5 * q.beta21 * q.beta21 - 0.5 * q.beta23 * q.beta23 * Y2 * (Y2 + 1.0);
        const double spread_vol[3] = {0.0, q.beta12 * Y1, q.beta23 * Y2};
        for (int j = 0; j < 3; ++j) {
            const auto u = static_cast<std::size_t>(j);
            a[3 + j] = -D->ann_l[u].coeffs[0] * z[3 + j] - spread_vol[j];
            const double x0 = z[6 + 2 * j], x1 = z[7 + 2 * j];
            a[6 + 2 * j] = 1.0 - D->ann_d[u].coeffs[0] * x1;
            a[7 + 2 * j] = x0 - D->ann_d[u].coeffs[1] * x1;
        }
        return a;
    };
    out.diffusion = [D](const Eigen::VectorXd& z) {
        const CDVParams& q = D->p;
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(12, 3);
        b(1, 0) = q.beta11;
        b(1, 1) = q.beta12 * D->spread(1, z);
        b(2, 0) = q.beta21;
        b(2, 2) = q.beta23 * D->spread(2, z);
        b(3, 0) = 1.0;
        b(4, 1) = 1.0;
        b(5, 2) = 1.0;
        return b;
    };
    out.initial_point = out.embed(Eigen::VectorXd::Zero(12));
    return out;
}

// ---------------------------------------------------------------------------
// State integration

StatePaths simulate_state(const FDRRealization& fdr, const SimConfig& cfg, const Eigen::VectorXd& z0,
                          const BrownianIncrements* increments) {
    cfg.validate();
    if (z0.size() != fdr.n) throw std::invalid_argument("simulate_state: initial state has wrong dimension");
    const int steps = cfg.steps();
    BrownianIncrements own;
    if (!increments) {
        own = generate_increments(cfg.n_paths, steps, fdr.d, cfg.dt, cfg.seed);
        increments = &own;
    }
    if (increments->n_paths < cfg.n_paths || increments->steps != steps || increments->d != fdr.d)
        throw std::invalid_argument("simulate_state: increments do not match the configuration");

    StatePaths out;
    out.times.resize(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) out.times[static_cast<std::size_t>(k)] = k * cfg.dt;
    out.z.resize(static_cast<std::size_t>(cfg.n_paths));
    Eigen::VectorXd dw(fdr.d);
    for (int p = 0; p < cfg.n_paths; ++p) {
        auto& path = out.z[static_cast<std::size_t>(p)];
        path.reserve(static_cast<std::size_t>(steps) + 1);
        path.push_back(z0);
        Eigen::VectorXd z = z0;
        for (int k = 0; k < steps; ++k) {
            for (int i = 0; i < fdr.d; ++i) dw[i] = increments->at(p, k, i);
            const Eigen::VectorXd a1 = fdr.drift(z);
            const Eigen::MatrixXd b1 = fdr.diffusion(z);
            const Eigen::VectorXd zp = z + a1 * cfg.dt + b1 * dw;
            const Eigen::VectorXd a2 = fdr.drift(zp);
            const Eigen::MatrixXd b2 = fdr.diffusion(zp);
            z += 0.5 * (a1 + a2) * cfg.dt + 0.5 * (b1 + b2) * dw;
            if (fdr.time_coordinate) z[0] = z0[0] + (k + 1) * cfg.dt;
            if (!z.allFinite()) throw std::runtime_error("simulate_state: non-finite state");
            path.push_back(z);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark coordinates

namespace {

constexpr double kCondLimit = 1e10;

// rows: maturity h, columns: (curve values..., spreads...)
Eigen::MatrixXd point_values(const FDRRealization& fdr, const Eigen::VectorXd& z, const std::vector<double>& xs) {
    const MultiCurveState s = fdr.embed(z);
    const int m = fdr.m;
    Eigen::MatrixXd v(static_cast<Eigen::Index>(xs.size()), 2 * m + 1);
    for (std::size_t h = 0; h < xs.size(); ++h) {
        const auto hi = static_cast<Eigen::Index>(h);
        for (int j = 0; j <= m; ++j) v(hi, j) = s.curves[static_cast<std::size_t>(j)].value(xs[h]);
        for (int j = 0; j < m; ++j) v(hi, m + 1 + j) = s.log_spreads[static_cast<std::size_t>(j)];
    }
    return v;
}

// tangent vectors d G / d z_k evaluated at the maturities: [k](h, component)
std::vector<Eigen::MatrixXd> tangent_values(const FDRRealization& fdr, const Eigen::VectorXd& z,
                                            const std::vector<double>& xs) {
    std::vector<Eigen::MatrixXd> out;
    for (int k = 0; k < fdr.n; ++k) {
        const double h = 1e-6 * (1.0 + std::abs(z[k]));
        Eigen::VectorXd zp = z, zm = z;
        zp[k] += h;
        zm[k] -= h;
        out.push_back((point_values(fdr, zp, xs) - point_values(fdr, zm, xs)) / (2.0 * h));
    }
    return out;
}

Eigen::MatrixXd assemble_K(const std::vector<Eigen::MatrixXd>& tv, const CoefficientSet& coeffs) {
    const auto n = static_cast<Eigen::Index>(tv.size());
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index h = 0; h < n; ++h)
        for (Eigen::Index k = 0; k < n; ++k)
            K(h, k) = tv[static_cast<std::size_t>(k)].row(h).dot(coeffs[static_cast<std::size_t>(h)]);
    return K;
}

double condition_number(const Eigen::MatrixXd& K) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(K);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[s.size() - 1] <= 0.0) return std::numeric_limits<double>::infinity();
    return s[0] / s[s.size() - 1];
}

void check_benchmark_args(const FDRRealization& fdr, const Eigen::VectorXd& z, const std::vector<double>& xs) {
    if (z.size() != fdr.n) throw std::invalid_argument("benchmark: state has wrong dimension");
    if (static_cast<int>(xs.size()) != fdr.n) throw std::invalid_argument("benchmark: need exactly n maturities");
    for (double x : xs)
        if (!(x >= 0.0)) throw std::invalid_argument("benchmark: maturities must be non-negative");
}

}  // namespace

BenchmarkResult benchmark_coordinates(const FDRRealization& fdr, const Eigen::VectorXd& z,
                                      const std::vector<double>& maturities, const CoefficientSet& coeffs) {
    check_benchmark_args(fdr, z, maturities);
    if (static_cast<int>(coeffs.size()) != fdr.n) throw std::invalid_argument("benchmark: need n coefficient vectors");
    for (const auto& c : coeffs)
        if (c.size() != 2 * fdr.m + 1) throw std::invalid_argument("benchmark: coefficients must lie in R^{2m+1}");

    BenchmarkResult r;
    r.K = assemble_K(tangent_values(fdr, z, maturities), coeffs);
    r.condition = condition_number(r.K);
    r.invertible = r.condition < kCondLimit;

    auto observables = [fdr, maturities, coeffs](const Eigen::VectorXd& zz) {
        const Eigen::MatrixXd v = point_values(fdr, zz, maturities);
        Eigen::VectorXd o(v.rows());
        for (Eigen::Index h = 0; h < v.rows(); ++h) o[h] = v.row(h).dot(coeffs[static_cast<std::size_t>(h)]);
        return o;
    };
    r.observables = observables;
    const bool ok = r.invertible;
    r.state_from_observables = [fdr, maturities, coeffs, observables, z, ok](const Eigen::VectorXd& target) {
        if (!ok) throw std::domain_error("benchmark: singular benchmark matrix");
        Eigen::VectorXd zz = z;
        for (int it = 0; it < 100; ++it) {
            const Eigen::VectorXd res = observables(zz) - target;
            if (res.norm() <= 1e-15 * (1.0 + target.norm())) break;
            const Eigen::MatrixXd J = assemble_K(tangent_values(fdr, zz, maturities), coeffs);
            const Eigen::VectorXd dz = J.fullPivLu().solve(res);
            zz -= dz;
            if (!zz.allFinite()) throw std::runtime_error("benchmark: Newton iteration diverged");
            if (dz.norm() <= 1e-14 * (1.0 + zz.norm())) break;
        }
        return zz;
    };
    return r;
}

CoefficientSearch choose_benchmark_coefficients(const FDRRealization& fdr, const Eigen::VectorXd& z,
                                                const std::vector<double>& maturities, int trials,
                                                std::uint64_t seed) {
    check_benchmark_args(fdr, z, maturities);
    if (trials < 1) throw std::invalid_argument("choose_benchmark_coefficients: trials must be positive");
    const auto tv = tangent_values(fdr, z, maturities);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    CoefficientSearch out;
    out.best_condition = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        CoefficientSet c(static_cast<std::size_t>(fdr.n), Eigen::VectorXd(2 * fdr.m + 1));
        for (auto& v : c)
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = u(rng);
        const double cond = condition_number(assemble_K(tv, c));
        out.trial_conditions.push_back(cond);
        if (cond < out.best_condition) {
            out.best_condition = cond;
            out.best = c;
        }
    }
    if (!(out.best_condition < kCondLimit))
        throw std::domain_error("choose_benchmark_coefficients: no invertible coefficient set found");
    return out;
}

}  // namespace mchjm
