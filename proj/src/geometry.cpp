#include "mchjm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mchjm {

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Consistent:
            return "consistent";
        case Verdict::Inconsistent:
            return "inconsistent";
        case Verdict::Inconclusive:
            return "inconclusive";
    }
    return "unknown";
}

Verdict classify_residual(double r) {
    if (r < 1e-6) return Verdict::Consistent;
    if (r > 1e-4) return Verdict::Inconsistent;
    return Verdict::Inconclusive;
}

namespace {

Eigen::VectorXd flat(const MultiCurveState& s, const std::vector<double>& grid) {
    const auto v = flatten(s, grid, true);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

double state_norm(const MultiCurveState& s, const std::vector<double>& grid) { return flat(s, grid).norm(); }

Eigen::MatrixXd family_jacobian(const ParamFamily& family, const Eigen::VectorXd& z, const std::vector<double>& grid) {
    if (z.size() != family.param_dim) throw std::invalid_argument("family_jacobian: wrong parameter dimension");
    Eigen::MatrixXd J;
    for (int k = 0; k < family.param_dim; ++k) {
        const double h = 1e-6 * (1.0 + std::abs(z[k]));
        Eigen::VectorXd zp = z, zm = z;
        zp[k] += h;
        zm[k] -= h;
        const Eigen::VectorXd col = (flat(family.point(zp), grid) - flat(family.point(zm), grid)) / (2.0 * h);
        if (k == 0) J.resize(col.size(), family.param_dim);
        J.col(k) = col;
    }
    return J;
}

TangencyReport tangency_residual(const ParamFamily& family, const VolatilitySpec& spec, const Eigen::VectorXd& z,
                                 const std::vector<double>& grid) {
    if (family.m != spec_m(spec)) throw std::invalid_argument("tangency_residual: family and model disagree on m");
    const Eigen::MatrixXd J = family_jacobian(family, z, grid);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    TangencyReport rep;
    rep.min_singular_ratio = sv[0] > 0.0 ? sv[sv.size() - 1] / sv[0] : 0.0;
    if (!(rep.min_singular_ratio > 1e-10)) throw std::domain_error("tangency_residual: family is not an immersion at z");

    const MultiCurveState g = family.point(z);
    auto rel = [&](const MultiCurveState& field) {
        const Eigen::VectorXd t = flat(field, grid);
        const double tn = t.norm();
        if (tn == 0.0) return 0.0;
        const Eigen::VectorXd c = svd.solve(t);
        return (J * c - t).norm() / tn;
    };
    rep.drift_residual = rel(stratonovich_drift(g, spec));
    double worst = rep.drift_residual;
    for (int i = 0; i < spec_d(spec); ++i) {
        rep.diffusion_residuals.push_back(rel(volatility_field(g, spec, i)));
        worst = std::max(worst, rep.diffusion_residuals.back());
    }
    rep.verdict = classify_residual(worst);
    return rep;
}

void HWFamilyParams::validate() const {
    if (a.empty() || a.size() != sigma.size() || beta.size() + 1 != a.size())
        throw std::invalid_argument("HWFamilyParams: need m+1 rates and vols and m spread vols");
    for (double x : a)
        if (!(x > 0.0)) throw std::invalid_argument("HWFamilyParams: rates must be positive");
}

ConstantVolSpec HWFamilyParams::spec() const {
    validate();
    return hull_white_spec(a, sigma, beta);
}

namespace {

QEFunction ns4(const double* z, double a) {
    return QEFunction::constant(z[0]) + QEFunction::exponential(z[1], -a) + QEFunction::exponential(z[2], -a, 1) +
           QEFunction::exponential(z[3], -2.0 * a);
}

}  // namespace

ParamFamily build_modified_ns_family(const HWFamilyParams& p, int strategy) {
    p.validate();
    if (strategy != 1 && strategy != 2) throw std::invalid_argument("build_modified_ns_family: strategy must be 1 or 2");
    const int m = p.m();
    ParamFamily f;
    f.m = m;
    f.name = strategy == 1 ? "modified-ns-1" : "modified-ns-2";
    f.param_dim = strategy == 1 ? 5 * m + 4 : 4 * (m + 1);
    const int dim = f.param_dim;
    f.point = [p, m, strategy, dim](const Eigen::VectorXd& z) {
        if (z.size() != dim) throw std::invalid_argument("modified NS family: wrong parameter dimension");
        MultiCurveState s;
        for (int j = 0; j <= m; ++j)
            s.curves.push_back(ForwardCurve::analytic(ns4(z.data() + 4 * j, p.a[static_cast<std::size_t>(j)])));
        for (int j = 1; j <= m; ++j) {
            if (strategy == 1) {
                s.log_spreads.push_back(z[4 * (m + 1) + j - 1]);
                continue;
            }
            const auto u = static_cast<std::size_t>(j);
            const double a0 = p.a[0], s0 = p.sigma[0], aj = p.a[u], sj = p.sigma[u], b = p.beta[u - 1];
            const double* z0 = z.data();
            const double* zj = z.data() + 4 * j;
            if (!(z0[2] > 0.0) || !(zj[2] > 0.0))
                throw std::domain_error("modified NS family: third coordinates must be positive");
            const double g0 = (-z0[1] + (-z0[0] - s0 * s0 / (2.0 * a0 * a0) + 0.5 * b * b) * std::log(z0[2]) -
                               z0[2] / a0 - 0.5 * z0[3]) /
                              a0;
            const double gj =
                (zj[1] + (zj[0] + sj * sj / (2.0 * aj * aj) - b * sj / aj) * std::log(zj[2]) + zj[2] / aj + 0.5 * zj[3]) /
                aj;
            s.log_spreads.push_back(g0 + gj);
        }
        return s;
    };
    return f;
}

ParamFamily build_plain_ns_family(double a) {
    if (!(a > 0.0)) throw std::invalid_argument("build_plain_ns_family: rate must be positive");
    ParamFamily f;
    f.name = "ns-plain";
    f.m = 0;
    f.param_dim = 3;
    f.point = [a](const Eigen::VectorXd& z) {
        if (z.size() != 3) throw std::invalid_argument("plain NS family: wrong parameter dimension");
        MultiCurveState s;
        s.curves.push_back(ForwardCurve::analytic(nelson_siegel(z[0], z[1], z[2], a)));
        return s;
    };
    return f;
}

Strategy2Report verify_strategy2_consistency(const std::vector<double>& a, const std::vector<double>& sigma,
                                             const Eigen::VectorXd& z, const std::vector<double>& grid) {
    if (a.empty() || a.size() != sigma.size())
        throw std::invalid_argument("verify_strategy2_consistency: need matching rates and vols");
    Strategy2Report rep;
    for (std::size_t j = 1; j < a.size(); ++j) rep.beta.push_back(sigma[j] / a[j] - sigma[0] / a[0]);
    HWFamilyParams p{a, sigma, rep.beta};
    rep.at_relation = tangency_residual(build_modified_ns_family(p, 2), p.spec(), z, grid);
    for (auto& b : p.beta) b *= 1.1;
    rep.perturbed = tangency_residual(build_modified_ns_family(p, 2), p.spec(), z, grid);
    return rep;
}

VectorField drift_field(const VolatilitySpec& spec) {
    return [spec](const MultiCurveState& r) { return stratonovich_drift(r, spec); };
}

VectorField diffusion_field(const VolatilitySpec& spec, int i) {
    return [spec, i](const MultiCurveState& r) { return volatility_field(r, spec, i); };
}

namespace {

MultiCurveState directional(const VectorField& v, const MultiCurveState& r, const MultiCurveState& w, double fd_step,
                            const std::vector<double>& grid) {
    const double wn = sup_norm(w, grid);
    if (wn == 0.0) return zero_like(v(r));
    const double s = fd_step * (1.0 + sup_norm(r, grid)) / wn;
    const MultiCurveState hi = v(add_scaled(r, s, w));
    const MultiCurveState lo = v(add_scaled(r, -s, w));
    return scaled(add_scaled(hi, -1.0, lo), 0.5 / s);
}

}  // namespace

MultiCurveState lie_bracket_numeric(const VectorField& v1, const VectorField& v2, const MultiCurveState& state,
                                    double fd_step, const std::vector<double>& grid) {
    if (!(fd_step > 0.0)) throw std::invalid_argument("lie_bracket_numeric: step must be positive");
    const MultiCurveState a = directional(v1, state, v2(state), fd_step, grid);
    const MultiCurveState b = directional(v2, state, v1(state), fd_step, grid);
    return add_scaled(a, -1.0, b);
}

VectorField lie_bracket_field(const VectorField& v1, const VectorField& v2, double fd_step,
                              const std::vector<double>& grid) {
    return [v1, v2, fd_step, grid](const MultiCurveState& r) { return lie_bracket_numeric(v1, v2, r, fd_step, grid); };
}

int span_dimension_estimate(const std::vector<VectorField>& fields, const MultiCurveState& state, int bracket_depth,
                            const std::vector<double>& grid) {
    if (bracket_depth < 0 || bracket_depth > 3)
        throw std::invalid_argument("span_dimension_estimate: bracket depth must lie in 0..3");
    std::vector<VectorField> all = fields;
    std::vector<VectorField> prev;
    for (int level = 1; level <= bracket_depth; ++level) {
        std::vector<VectorField> next;
        if (level == 1) {
            for (std::size_t i = 0; i < fields.size(); ++i)
                for (std::size_t j = i + 1; j < fields.size(); ++j) next.push_back(lie_bracket_field(fields[i], fields[j]));
        } else {
            for (const auto& g : fields)
                for (const auto& p : prev) next.push_back(lie_bracket_field(g, p));
        }
        all.insert(all.end(), next.begin(), next.end());
        prev = std::move(next);
    }
    if (all.empty()) return 0;

    std::vector<Eigen::VectorXd> cols;
    double max_norm = 0.0;
    for (const auto& f : all) {
        cols.push_back(flat(f(state), grid));
        max_norm = std::max(max_norm, cols.back().norm());
    }
    if (max_norm == 0.0) return 0;
    std::vector<Eigen::VectorXd> kept;
    for (auto& c : cols) {
        const double n = c.norm();
        if (n > 1e-8 * max_norm) kept.push_back(c / n);
    }
    Eigen::MatrixXd A(kept.front().size(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) A.col(static_cast<Eigen::Index>(k)) = kept[k];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& s = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > 1e-8 * s[0]) ++rank;
    return rank;
}

std::vector<CommutationResult> commutation_check(const VolatilitySpec& spec, const std::vector<int>& spread_indices,
                                                 const MultiCurveState& state, const std::vector<double>& grid) {
    const int m = spec_m(spec);
    std::vector<VectorField> fields{drift_field(spec)};
    for (int i = 0; i < spec_d(spec); ++i) fields.push_back(diffusion_field(spec, i));
    std::vector<CommutationResult> out;
    for (int k : spread_indices) {
        if (k < 1 || k > m) throw std::out_of_range("commutation_check: spread index out of range");
        MultiCurveState gamma = zero_like(state);
        gamma.log_spreads[static_cast<std::size_t>(k - 1)] = 1.0;
        CommutationResult r;
        r.k = k;
        for (const auto& v : fields) {
            // gamma_k is constant, so [v, gamma_k] = D v[gamma_k]
            const double vn = state_norm(v(state), grid);
            const double bn = state_norm(directional(v, state, gamma, 1e-2, grid), grid);
            const double rel = vn > 0.0 ? bn / vn : bn;
            r.max_relative_norm = std::max(r.max_relative_norm, rel);
        }
        r.commutes = r.max_relative_norm < 1e-6;
        out.push_back(r);
    }
    return out;
}

}  // namespace mchjm
