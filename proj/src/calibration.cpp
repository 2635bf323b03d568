#include "mchjm/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mchjm {

void MarketSnapshot::validate() const {
    if (maturities.empty()) throw std::invalid_argument("MarketSnapshot: no maturities");
    for (std::size_t k = 0; k < maturities.size(); ++k) {
        if (!(maturities[k] > 0.0)) throw std::invalid_argument("MarketSnapshot: maturities must be positive");
        if (k > 0 && !(maturities[k] > maturities[k - 1]))
            throw std::invalid_argument("MarketSnapshot: maturities must be strictly increasing");
    }
    for (const auto& b : bonds) {
        if (b.size() != maturities.size()) throw std::invalid_argument("MarketSnapshot: bond row has wrong length");
        for (double p : b)
            if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument("MarketSnapshot: bond prices must be positive");
    }
    for (double y : log_spreads)
        if (!std::isfinite(y)) throw std::invalid_argument("MarketSnapshot: non-finite log-spread");
}

double MarketSnapshot::yield(int j, std::size_t k) const {
    const double p = bonds[static_cast<std::size_t>(j)][k];
    if (!(p > 0.0)) throw std::invalid_argument("MarketSnapshot: nonpositive bond price");
    return -std::log(p) / maturities[k];
}

void Dataset::validate() const {
    if (days.empty()) throw std::invalid_argument("Dataset: no snapshots");
    for (std::size_t i = 0; i < days.size(); ++i) {
        days[i].validate();
        if (i > 0) {
            if (days[i].date != days[i - 1].date + 1) throw std::invalid_argument("Dataset: dates must be contiguous");
            if (days[i].maturities != days[0].maturities)
                throw std::invalid_argument("Dataset: maturity set differs between dates");
        }
    }
}

std::vector<MarketSnapshot> Dataset::window(std::size_t begin, std::size_t count) const {
    if (begin + count > days.size()) throw InsufficientData("Dataset: window exceeds the available dates");
    return {days.begin() + static_cast<std::ptrdiff_t>(begin),
            days.begin() + static_cast<std::ptrdiff_t>(begin + count)};
}

CalibrationContext context_from(const Dataset& data) {
    if (data.days.empty()) throw std::invalid_argument("context_from: empty dataset");
    CalibrationContext c;
    c.anchor_date = data.first_date();
    c.yM = data.days.front().log_spreads;
    return c;
}

namespace {

double elapsed(const MarketSnapshot& snap, const CalibrationContext& ctx) {
    return (snap.date - ctx.anchor_date) * ctx.day_fraction;
}

// Residual in reduced coordinates v = (b, w0, w1, w2), see HW3Embedding.
Eigen::VectorXd residual_reduced(const HW3Embedding& E, const MarketSnapshot& snap, const Eigen::Vector4d& v,
                                 const Eigen::Vector3d& y, const CalibrationContext& ctx) {
    const std::size_t n = snap.maturities.size();
    const double t = elapsed(snap, ctx);
    Eigen::VectorXd r(3 * static_cast<Eigen::Index>(n) + 2);
    for (int j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < n; ++k) {
            const double x = snap.maturities[k];
            r[static_cast<Eigen::Index>(static_cast<std::size_t>(j) * n + k)] =
                snap.yield(j, k) - E.forward_integral_reduced(j, t, v[j + 1], y.data(), x) / x;
        }
    const double* w = v.data() + 1;
    r[static_cast<Eigen::Index>(3 * n)] = E.log_spread_reduced(1, t, v[0], w, y.data()) - snap.log_spreads[0];
    r[static_cast<Eigen::Index>(3 * n + 1)] = E.log_spread_reduced(2, t, v[0], w, y.data()) - snap.log_spreads[1];
    return r;
}

Eigen::Vector4d reduce(const HW3Embedding& E, const Eigen::Vector4d& z1) {
    const double z[5] = {0.0, z1[0], z1[1], z1[2], z1[3]};
    return {z1[0], E.reduced_coordinate(0, z), E.reduced_coordinate(1, z), E.reduced_coordinate(2, z)};
}

// The affine map is assembled in reduced coordinates: in the raw state z_1 the
// columns are nearly collinear when the rates are close, and the resulting
// round-off would make the outer objective noisy.
InnerSolution inner_with(const HW3Embedding& E, const MarketSnapshot& snap, const CalibrationContext& ctx) {
    const Eigen::Vector4d v0 = Eigen::Vector4d::Zero();
    const Eigen::Vector3d y0 = Eigen::Vector3d::Zero();
    const Eigen::VectorXd c = residual_reduced(E, snap, v0, y0, ctx);
    Eigen::MatrixXd A(c.size(), 7);
    for (int k = 0; k < 7; ++k) {
        Eigen::Vector4d v = v0;
        Eigen::Vector3d y = y0;
        if (k < 4)
            v[k] = 1.0;
        else
            y[k - 4] = 1.0;
        A.col(k) = residual_reduced(E, snap, v, y, ctx) - c;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double cut = 1e-12 * s[0];
    Eigen::VectorXd u = Eigen::VectorXd::Zero(7);
    const Eigen::VectorXd utc = svd.matrixU().transpose() * c;
    InnerSolution out;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] > cut && s[i] > 0.0) {
            u -= svd.matrixV().col(i) * (utc[i] / s[i]);
            ++out.rank;
        }
    }
    out.rank_deficient = out.rank < 7;
    out.reduced = u.head<4>();
    out.y = u.tail<3>();
    const auto z = E.state_from_reduced(elapsed(snap, ctx), out.reduced[0], out.reduced.data() + 1);
    out.z1 = Eigen::Vector4d(z[1], z[2], z[3], z[4]);
    out.residual = residual_reduced(E, snap, out.reduced, out.y, ctx);
    out.residual_norm = out.residual.norm();
    return out;
}

}  // namespace

Eigen::VectorXd residual(const MarketSnapshot& snap, const Theta& theta, const Eigen::Vector4d& z1,
                         const Eigen::Vector3d& y, const CalibrationContext& ctx) {
    const HW3Embedding E(theta, ctx.yM);
    return residual_reduced(E, snap, reduce(E, z1), y, ctx);
}

InnerSolution inner_solve(const MarketSnapshot& snap, const Theta& theta, const CalibrationContext& ctx) {
    return inner_with(HW3Embedding(theta, ctx.yM), snap, ctx);
}

bool Bounds::contains(const Theta& t) const {
    const auto v = t.to_vector();
    for (std::size_t k = 0; k < 8; ++k)
        if (!(v[k] >= lo[k] && v[k] <= hi[k])) return false;
    return true;
}

namespace {

struct Evaluation {
    double sse = std::numeric_limits<double>::infinity();
    Eigen::VectorXd stacked;
    std::vector<DayFit> fits;
};

Evaluation evaluate(const std::vector<MarketSnapshot>& snaps, const std::vector<double>& p,
                    const CalibrationContext& ctx) {
    Evaluation ev;
    const Theta th = Theta::from_vector(p);
    try {
        th.validate();
    } catch (const std::invalid_argument&) {
        return ev;
    }
    const HW3Embedding E(th, ctx.yM);
    Eigen::Index total = 0;
    for (const auto& s : snaps) total += s.size();
    ev.stacked.resize(total);
    Eigen::Index at = 0;
    double sse = 0.0;
    for (const auto& s : snaps) {
        const InnerSolution in = inner_with(E, s, ctx);
        ev.stacked.segment(at, in.residual.size()) = in.residual;
        at += in.residual.size();
        sse += in.residual.squaredNorm();
        ev.fits.push_back({s.date, in.z1, in.reduced, in.y, in.residual_norm});
    }
    ev.sse = std::isfinite(sse) ? sse : std::numeric_limits<double>::infinity();
    return ev;
}

Eigen::MatrixXd forward_jacobian(const std::vector<MarketSnapshot>& snaps, const std::vector<double>& p,
                                 const Evaluation& base, const std::vector<int>& free, const Bounds& b,
                                 const CalibrationContext& ctx, int& evals) {
    Eigen::MatrixXd J(base.stacked.size(), static_cast<Eigen::Index>(free.size()));
    for (std::size_t c = 0; c < free.size(); ++c) {
        const auto k = static_cast<std::size_t>(free[c]);
        double h = 1e-7 * (1.0 + std::abs(p[k]));
        if (p[k] + h > b.hi[k]) h = -h;
        std::vector<double> q = p;
        q[k] += h;
        const Evaluation e = evaluate(snaps, q, ctx);
        ++evals;
        if (!std::isfinite(e.sse)) {
            J.col(static_cast<Eigen::Index>(c)).setZero();
            continue;
        }
        J.col(static_cast<Eigen::Index>(c)) = (e.stacked - base.stacked) / h;
    }
    return J;
}

// Fold a trial coordinate back into [lo, hi] by reflection at the violated
// bound; clamping instead would park parameters such as sigma on the boundary,
// where the objective is flat in that coordinate.
double reflect_into(double x, double lo, double hi) {
    const double w = hi - lo;
    if (!(w > 0.0)) return lo;
    double u = std::fmod(x - lo, 2.0 * w);
    if (u < 0.0) u += 2.0 * w;
    return u <= w ? lo + u : hi - (u - w);
}

}  // namespace

double total_sse(const std::vector<MarketSnapshot>& snaps, const Theta& theta, const CalibrationContext& ctx) {
    return evaluate(snaps, theta.to_vector(), ctx).sse;
}

CalibrationResult outer_calibrate(const std::vector<MarketSnapshot>& snaps, const Theta& theta0,
                                  const CalibrationContext& ctx, const CalibrationOptions& opts) {
    if (snaps.size() < 2) throw std::invalid_argument("outer_calibrate: need at least two snapshots");
    if (!opts.bounds.contains(theta0)) throw std::invalid_argument("outer_calibrate: theta0 outside the bounds");
    theta0.validate();
    for (const auto& s : snaps) s.validate();

    std::vector<int> free;
    for (int k = 0; k < 8; ++k)
        if (opts.free[static_cast<std::size_t>(k)]) free.push_back(k);

    CalibrationResult res;
    res.context = ctx;
    std::vector<double> p = theta0.to_vector();
    Evaluation cur = evaluate(snaps, p, ctx);
    res.evaluations = 1;
    res.sse_history.push_back(cur.sse);
    double lambda = 1e-3;
    res.stop_reason = "max_iterations";

    while (res.iterations < opts.max_iterations && !free.empty()) {
        ++res.iterations;
        if (cur.sse == 0.0) {
            res.converged = true;
            res.stop_reason = "zero_residual";
            break;
        }
        const Eigen::MatrixXd J = forward_jacobian(snaps, p, cur, free, opts.bounds, ctx, res.evaluations);
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * cur.stacked;
        const double dmax = A.diagonal().maxCoeff();
        if (!(dmax > 0.0)) {
            res.converged = true;
            res.stop_reason = "zero_gradient";
            break;
        }
        Eigen::VectorXd D = A.diagonal().cwiseMax(1e-12 * dmax);
        bool stop = false, accepted = false;
        while (!accepted) {
            Eigen::MatrixXd M = A;
            M.diagonal() += lambda * D;
            const Eigen::VectorXd delta = -M.ldlt().solve(g);
            std::vector<double> q = p;
            double step2 = 0.0, norm2 = 0.0;
            for (std::size_t c = 0; c < free.size(); ++c) {
                const auto k = static_cast<std::size_t>(free[c]);
                q[k] = reflect_into(p[k] + delta[static_cast<Eigen::Index>(c)], opts.bounds.lo[k], opts.bounds.hi[k]);
                step2 += (q[k] - p[k]) * (q[k] - p[k]);
                norm2 += p[k] * p[k];
            }
            if (std::sqrt(step2) < opts.xtol * (1.0 + std::sqrt(norm2))) {
                res.converged = true;
                res.stop_reason = "small_step";
                stop = true;
                break;
            }
            Evaluation trial = evaluate(snaps, q, ctx);
            ++res.evaluations;
            if (trial.sse < cur.sse) {
                const double rel = (cur.sse - trial.sse) / cur.sse;
                p = q;
                cur = std::move(trial);
                res.sse_history.push_back(cur.sse);
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel < opts.ftol) {
                    res.converged = true;
                    res.stop_reason = "small_improvement";
                    stop = true;
                }
            } else {
                lambda *= 4.0;
                if (lambda > 1e16) {
                    res.converged = true;
                    res.stop_reason = "no_decrease";
                    stop = true;
                    break;
                }
            }
        }
        if (stop) break;
    }

    res.theta = Theta::from_vector(p);
    res.per_day = cur.fits;
    res.total_sse = cur.sse;
    if (!free.empty() && std::isfinite(cur.sse)) {
        const Eigen::MatrixXd J = forward_jacobian(snaps, p, cur, free, opts.bounds, ctx, res.evaluations);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
        const auto& s = svd.singularValues();
        res.jacobian_condition =
            s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();
        res.weakly_identified = res.jacobian_condition > 1e8;
    }
    return res;
}

ErrorMetrics error_metrics(const CalibrationResult& result, const std::vector<MarketSnapshot>& snaps) {
    if (snaps.empty() || result.per_day.size() != snaps.size())
        throw std::invalid_argument("error_metrics: result and snapshots disagree");
    const HW3Embedding E(result.theta, result.context.yM);
    ErrorMetrics out;
    const MarketSnapshot& last = snaps.back();
    const DayFit& lf = result.per_day.back();
    for (int j = 0; j < 3; ++j) {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < last.maturities.size(); ++k) {
            const double x = last.maturities[k];
            const double mk = last.yield(j, k);
            const double gk =
                E.forward_integral_reduced(j, elapsed(last, result.context), lf.reduced[j + 1], lf.y.data(), x) / x;
            num += (gk - mk) * (gk - mk);
            den += mk * mk;
        }
        if (den == 0.0) throw std::domain_error("error_metrics: zero market yield vector");
        out.yield[static_cast<std::size_t>(j)] = std::sqrt(num / den);
    }
    for (int j = 1; j <= 2; ++j) {
        double num = 0.0, den = 0.0;
        for (std::size_t h = 0; h < snaps.size(); ++h) {
            const DayFit& f = result.per_day[h];
            const double mk = snaps[h].log_spreads[static_cast<std::size_t>(j - 1)];
            const double gk =
                E.log_spread_reduced(j, elapsed(snaps[h], result.context), f.reduced[0], f.reduced.data() + 1, f.y.data());
            num += (gk - mk) * (gk - mk);
            den += mk * mk;
        }
        if (den == 0.0) throw std::domain_error("error_metrics: zero market log-spread series");
        out.spread[static_cast<std::size_t>(j - 1)] = std::sqrt(num / den);
    }
    return out;
}

std::vector<SweepRow> window_sweep(const Dataset& data, const std::vector<int>& months, std::size_t end_index,
                                   const Theta& theta0, const CalibrationOptions& opts) {
    data.validate();
    if (end_index >= data.days.size()) throw InsufficientData("window_sweep: end index beyond the dataset");
    const CalibrationContext ctx = context_from(data);
    std::vector<SweepRow> rows;
    for (int mo : months) {
        if (mo < 1) throw std::invalid_argument("window_sweep: window lengths must be positive");
        SweepRow row;
        row.months = mo;
        row.days = mo * kDaysPerMonth;
        const auto count = static_cast<std::size_t>(row.days);
        if (count > end_index + 1) {
            row.skipped = true;
            rows.push_back(row);
            continue;
        }
        const auto snaps = data.window(end_index + 1 - count, count);
        const CalibrationResult r = outer_calibrate(snaps, theta0, ctx, opts);
        row.converged = r.converged;
        row.theta = r.theta;
        row.sse = r.total_sse;
        row.errors = error_metrics(r, snaps);
        rows.push_back(row);
    }
    return rows;
}

StabilityReport stability_analysis(const Dataset& data, int window_months, int rolls, const Theta& theta0,
                                   const CalibrationOptions& opts) {
    data.validate();
    if (window_months < 1 || rolls < 1) throw std::invalid_argument("stability_analysis: need positive window and rolls");
    const auto W = static_cast<std::size_t>(window_months * kDaysPerMonth);
    if (data.days.size() < W + static_cast<std::size_t>(rolls) - 1)
        throw InsufficientData("stability_analysis: dataset shorter than window + rolls");
    const CalibrationContext ctx = context_from(data);
    StabilityReport rep;
    Theta guess = theta0;
    for (int i = 0; i < rolls; ++i) {
        const CalibrationResult r = outer_calibrate(data.window(static_cast<std::size_t>(i), W), guess, ctx, opts);
        rep.thetas.push_back(r.theta);
        rep.converged.push_back(r.converged);
        if (!r.converged) ++rep.excluded;
        guess = r.theta;
    }
    std::array<std::vector<double>, 8> cols;
    for (std::size_t i = 0; i < rep.thetas.size(); ++i) {
        if (!rep.converged[i]) continue;
        const auto v = rep.thetas[i].to_vector();
        for (std::size_t k = 0; k < 8; ++k) cols[k].push_back(v[k]);
    }
    for (std::size_t k = 0; k < 8; ++k) {
        const auto& c = cols[k];
        if (c.empty()) continue;
        double mean = 0.0;
        for (double x : c) mean += x;
        mean /= static_cast<double>(c.size());
        double ss = 0.0;
        for (double x : c) ss += (x - mean) * (x - mean);
        rep.mean[k] = mean;
        rep.stddev[k] = c.size() > 1 ? std::sqrt(ss / static_cast<double>(c.size() - 1)) : 0.0;
    }
    return rep;
}

std::vector<double> standard_maturities() {
    std::vector<double> x;
    for (int mo = 1; mo <= 6; ++mo) x.push_back(mo / 12.0);
    x.push_back(0.75);
    for (int yr = 1; yr <= 10; ++yr) x.push_back(static_cast<double>(yr));
    return x;
}

Dataset synthesize_market_data(const SynthSpec& spec) {
    if (spec.days < 1) throw std::invalid_argument("synthesize_market_data: need at least one day");
    if (!(spec.noise_sd >= 0.0)) throw std::invalid_argument("synthesize_market_data: noise must be non-negative");
    spec.theta.validate();
    if (spec.switch_day >= 0) spec.theta_after.validate();
    const std::vector<double> xs = spec.maturities.empty() ? standard_maturities() : spec.maturities;
    const double dt = kDayFraction;

    const HW3Embedding before(spec.theta, spec.yM);
    const HW3Embedding after(spec.switch_day >= 0 ? spec.theta_after : spec.theta, spec.yM);
    auto regime = [&](int day) -> const HW3Embedding& {
        return (spec.switch_day >= 0 && day >= spec.switch_day) ? after : before;
    };
    auto drift = [](const Theta& th, const Eigen::Matrix<double, 5, 1>& z) {
        const double a0 = th.a0, a1 = th.a1, a2 = th.a2;
        const double c0 = a0 * a1 * a2, c1 = a0 * a1 + a0 * a2 + a1 * a2, c2 = a0 + a1 + a2;
        Eigen::Matrix<double, 5, 1> a;
        a << 1.0, 0.0, z[1] - c0 * z[4], z[2] - c1 * z[4], z[3] - c2 * z[4];
        return a;
    };

    BrownianIncrements inc;
    if (spec.days > 1) inc = generate_increments(1, spec.days - 1, 1, dt, spec.seed);
    std::seed_seq noise_seq{static_cast<std::uint32_t>(spec.seed & 0xffffffffULL),
                            static_cast<std::uint32_t>(spec.seed >> 32), 0x6e6f6973u};
    std::mt19937_64 rng(noise_seq);
    std::normal_distribution<double> normal(0.0, 1.0);

    Dataset data;
    Eigen::Matrix<double, 5, 1> z = Eigen::Matrix<double, 5, 1>::Zero();
    for (int day = 0; day < spec.days; ++day) {
        if (day > 0) {
            const Theta& th = regime(day - 1).theta();
            Eigen::Matrix<double, 5, 1> b = Eigen::Matrix<double, 5, 1>::Zero();
            b[1] = inc.at(0, day - 1, 0);
            const auto a1 = drift(th, z);
            const Eigen::Matrix<double, 5, 1> zp = z + a1 * dt + b;
            z = z + 0.5 * (a1 + drift(th, zp)) * dt + b;
            z[0] = day * dt;
        }
        const HW3Embedding& E = regime(day);
        MarketSnapshot s;
        s.date = day;
        s.maturities = xs;
        for (int j = 0; j < 3; ++j) {
            auto& row = s.bonds[static_cast<std::size_t>(j)];
            for (double x : xs) {
                double yld = E.forward_integral(j, z.data(), spec.y.data(), x) / x;
                if (spec.noise_sd > 0.0) yld += spec.noise_sd * normal(rng);
                row.push_back(std::exp(-x * yld));
            }
        }
        s.log_spreads = {E.log_spread(1, z.data(), spec.y.data()), E.log_spread(2, z.data(), spec.y.data())};
        data.days.push_back(std::move(s));
    }
    return data;
}

}  // namespace mchjm
