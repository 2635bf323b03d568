#include "mchjm/qe.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mchjm {

namespace {

constexpr double kZeroCoeff = 1e-14;

bool same_value(double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
}

double horner(const std::vector<double>& p, double x) {
    double v = 0.0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) v = v * x + *it;
    return v;
}

void trim(std::vector<double>& p) {
    while (!p.empty() && std::abs(p.back()) <= kZeroCoeff) p.pop_back();
}

void add_into(std::vector<double>& acc, const std::vector<double>& p, double scale = 1.0) {
    if (acc.size() < p.size()) acc.resize(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) acc[i] += scale * p[i];
}

std::vector<double> poly_derivative(const std::vector<double>& p) {
    if (p.size() <= 1) return {};
    std::vector<double> d(p.size() - 1);
    for (std::size_t i = 1; i < p.size(); ++i) d[i - 1] = static_cast<double>(i) * p[i];
    return d;
}

// p(x + c) by repeated synthetic division
std::vector<double> poly_shift(const std::vector<double>& p, double c) {
    std::vector<double> q = p;
    const std::size_t n = q.size();
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = n - 1; j > i; --j) q[j - 1] += c * q[j];
    return q;
}

}  // namespace

std::vector<double> poly_multiply(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

double QETerm::evaluate(double x) const {
    const double e = std::exp(rate * x);
    if (freq == 0.0) return e * horner(cos_poly, x);
    return e * (horner(cos_poly, x) * std::cos(freq * x) + horner(sin_poly, x) * std::sin(freq * x));
}

int QETerm::degree() const {
    return static_cast<int>(std::max(cos_poly.size(), sin_poly.size())) - 1;
}

QEFunction::QEFunction(std::vector<QETerm> terms) : terms_(std::move(terms)) { canonicalize(); }

QEFunction QEFunction::constant(double c) { return QEFunction({QETerm{0.0, 0.0, {c}, {}}}); }

QEFunction QEFunction::exponential(double c, double rate, int power) {
    if (power < 0) throw std::invalid_argument("QEFunction::exponential: negative power");
    std::vector<double> p(static_cast<std::size_t>(power) + 1, 0.0);
    p.back() = c;
    return QEFunction({QETerm{rate, 0.0, p, {}}});
}

QEFunction QEFunction::oscillating(double rate, double freq, double c, double s) {
    return QEFunction({QETerm{rate, freq, {c}, {s}}});
}

void QEFunction::canonicalize() {
    std::vector<QETerm> in;
    in.swap(terms_);
    for (auto& t : in) {
        if (!std::isfinite(t.rate) || !std::isfinite(t.freq))
            throw std::invalid_argument("QEFunction: non-finite rate or frequency");
        if (t.freq < 0.0) {  // cos even, sin odd
            t.freq = -t.freq;
            for (auto& c : t.sin_poly) c = -c;
        }
        if (t.freq <= 1e-12) {
            t.freq = 0.0;
            t.sin_poly.clear();
        }
        bool merged = false;
        for (auto& u : terms_) {
            if (same_value(u.rate, t.rate) && same_value(u.freq, t.freq)) {
                add_into(u.cos_poly, t.cos_poly);
                add_into(u.sin_poly, t.sin_poly);
                merged = true;
                break;
            }
        }
        if (!merged) terms_.push_back(std::move(t));
    }
    std::vector<QETerm> out;
    for (auto& t : terms_) {
        if (t.freq == 0.0) t.sin_poly.clear();
        trim(t.cos_poly);
        trim(t.sin_poly);
        if (!t.cos_poly.empty() || !t.sin_poly.empty()) out.push_back(std::move(t));
    }
    std::sort(out.begin(), out.end(), [](const QETerm& a, const QETerm& b) {
        if (a.rate != b.rate) return a.rate < b.rate;
        return a.freq < b.freq;
    });
    terms_ = std::move(out);
}

double QEFunction::max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& t : terms_) {
        for (double c : t.cos_poly) m = std::max(m, std::abs(c));
        for (double c : t.sin_poly) m = std::max(m, std::abs(c));
    }
    return m;
}

double QEFunction::evaluate(double x) const {
    double v = 0.0;
    for (const auto& t : terms_) v += t.evaluate(x);
    return v;
}

QEFunction QEFunction::operator+(const QEFunction& o) const {
    std::vector<QETerm> all = terms_;
    all.insert(all.end(), o.terms_.begin(), o.terms_.end());
    return QEFunction(std::move(all));
}

QEFunction QEFunction::operator-() const { return *this * -1.0; }

QEFunction QEFunction::operator-(const QEFunction& o) const { return *this + (-o); }

QEFunction QEFunction::operator*(double c) const {
    std::vector<QETerm> all = terms_;
    for (auto& t : all) {
        for (auto& v : t.cos_poly) v *= c;
        for (auto& v : t.sin_poly) v *= c;
    }
    return QEFunction(std::move(all));
}

QEFunction& QEFunction::operator+=(const QEFunction& o) {
    *this = *this + o;
    return *this;
}

QEFunction QEFunction::operator*(const QEFunction& o) const { return multiply(*this, o); }

QEFunction QEFunction::shift(double c) const {
    std::vector<QETerm> out;
    for (const auto& t : terms_) {
        const double e = std::exp(t.rate * c);
        std::vector<double> p = poly_shift(t.cos_poly, c);
        std::vector<double> q = poly_shift(t.sin_poly, c);
        if (t.freq == 0.0) {
            for (auto& v : p) v *= e;
            out.push_back(QETerm{t.rate, 0.0, p, {}});
            continue;
        }
        // p(x+c) cos(w x + w c) + q(x+c) sin(w x + w c)
        const double cw = std::cos(t.freq * c), sw = std::sin(t.freq * c);
        std::vector<double> nc, ns;
        add_into(nc, p, e * cw);
        add_into(nc, q, e * sw);
        add_into(ns, p, -e * sw);
        add_into(ns, q, e * cw);
        out.push_back(QETerm{t.rate, t.freq, nc, ns});
    }
    return QEFunction(std::move(out));
}

bool QEFunction::approx_equal(const QEFunction& o, double tol) const {
    return (*this - o).max_abs_coefficient() <= tol;
}

std::string QEFunction::to_string() const {
    std::ostringstream os;
    os.precision(10);
    if (terms_.empty()) return "0";
    bool first = true;
    for (const auto& t : terms_) {
        if (!first) os << " + ";
        first = false;
        os << "e^{" << t.rate << "x}[";
        os << "(";
        for (std::size_t i = 0; i < t.cos_poly.size(); ++i) os << (i ? ", " : "") << t.cos_poly[i];
        os << ")";
        if (t.freq != 0.0) {
            os << "cos(" << t.freq << "x) + (";
            for (std::size_t i = 0; i < t.sin_poly.size(); ++i) os << (i ? ", " : "") << t.sin_poly[i];
            os << ")sin(" << t.freq << "x)";
        }
        os << "]";
    }
    return os.str();
}

QEFunction derive(const QEFunction& f) {
    std::vector<QETerm> out;
    for (const auto& t : f.terms()) {
        // (r p + p' + w q) cos + (r q + q' - w p) sin
        std::vector<double> nc, ns;
        add_into(nc, t.cos_poly, t.rate);
        add_into(nc, poly_derivative(t.cos_poly));
        if (t.freq != 0.0) {
            add_into(nc, t.sin_poly, t.freq);
            add_into(ns, t.sin_poly, t.rate);
            add_into(ns, poly_derivative(t.sin_poly));
            add_into(ns, t.cos_poly, -t.freq);
        }
        out.push_back(QETerm{t.rate, t.freq, nc, ns});
    }
    return QEFunction(std::move(out));
}

QEFunction derive(const QEFunction& f, int k) {
    QEFunction g = f;
    for (int i = 0; i < k; ++i) g = derive(g);
    return g;
}

QEFunction integrate_from_zero(const QEFunction& f) {
    std::vector<QETerm> out;
    double at_zero = 0.0;
    for (const auto& t : f.terms()) {
        const std::size_t n = static_cast<std::size_t>(t.degree() + 1);
        std::vector<double> p = t.cos_poly, q = t.sin_poly;
        p.resize(n, 0.0);
        q.resize(n, 0.0);
        if (t.rate == 0.0 && t.freq == 0.0) {
            std::vector<double> P(n + 1, 0.0);
            for (std::size_t k = 0; k < n; ++k) P[k + 1] = p[k] / static_cast<double>(k + 1);
            out.push_back(QETerm{0.0, 0.0, P, {}});
            continue;
        }
        // Solve r P + P' + w Q = p, r Q + Q' - w P = q from the top degree down.
        const double r = t.rate, w = t.freq, det = r * r + w * w;
        std::vector<double> P(n, 0.0), Q(n, 0.0);
        for (std::size_t kk = n; kk-- > 0;) {
            double bp = p[kk], bq = q[kk];
            if (kk + 1 < n) {
                bp -= static_cast<double>(kk + 1) * P[kk + 1];
                bq -= static_cast<double>(kk + 1) * Q[kk + 1];
            }
            P[kk] = (r * bp - w * bq) / det;
            Q[kk] = (w * bp + r * bq) / det;
        }
        at_zero += P[0];
        out.push_back(QETerm{t.rate, t.freq, P, t.freq == 0.0 ? std::vector<double>{} : Q});
    }
    out.push_back(QETerm{0.0, 0.0, {-at_zero}, {}});
    return QEFunction(std::move(out));
}

double eval_at_zero(const QEFunction& f) {
    double v = 0.0;
    for (const auto& t : f.terms())
        if (!t.cos_poly.empty()) v += t.cos_poly[0];
    return v;
}

QEFunction multiply(const QEFunction& f, const QEFunction& g) {
    std::vector<QETerm> out;
    for (const auto& a : f.terms()) {
        for (const auto& b : g.terms()) {
            const double rate = a.rate + b.rate;
            const auto pp = poly_multiply(a.cos_poly, b.cos_poly);
            if (a.freq == 0.0 && b.freq == 0.0) {
                out.push_back(QETerm{rate, 0.0, pp, {}});
                continue;
            }
            const auto qq = poly_multiply(a.sin_poly, b.sin_poly);
            const auto pq = poly_multiply(a.cos_poly, b.sin_poly);
            const auto qp = poly_multiply(a.sin_poly, b.cos_poly);
            // cos A cos B = (cos(A-B) + cos(A+B))/2, sin A sin B = (cos(A-B) - cos(A+B))/2
            // sin A cos B = (sin(A+B) + sin(A-B))/2, cos A sin B = (sin(A+B) - sin(A-B))/2
            std::vector<double> c_sum, s_sum, c_dif, s_dif;
            add_into(c_sum, pp, 0.5);
            add_into(c_sum, qq, -0.5);
            add_into(c_dif, pp, 0.5);
            add_into(c_dif, qq, 0.5);
            add_into(s_sum, qp, 0.5);
            add_into(s_sum, pq, 0.5);
            add_into(s_dif, qp, 0.5);
            add_into(s_dif, pq, -0.5);
            out.push_back(QETerm{rate, a.freq + b.freq, c_sum, s_sum});
            out.push_back(QETerm{rate, a.freq - b.freq, c_dif, s_dif});
        }
    }
    return QEFunction(std::move(out));
}

double evaluate(const QEFunction& f, double x) { return f.evaluate(x); }

double integral(const QEFunction& f, double a, double b) {
    const QEFunction h = integrate_from_zero(f);
    return h(b) - h(a);
}

double AnnihilatorPoly::evaluate(double gamma) const { return horner(coeffs, gamma); }

namespace {

struct Root {
    double rate, freq;
    int mult;
};

void collect_roots(const QEFunction& f, std::vector<Root>& roots) {
    for (const auto& t : f.terms()) {
        const int m = t.degree() + 1;
        bool found = false;
        for (auto& r : roots) {
            if (same_value(r.rate, t.rate) && same_value(r.freq, t.freq)) {
                r.mult = std::max(r.mult, m);
                found = true;
                break;
            }
        }
        if (!found) roots.push_back(Root{t.rate, t.freq, m});
    }
}

AnnihilatorPoly expand(const std::vector<Root>& roots) {
    std::vector<double> poly{1.0};
    for (const auto& r : roots) {
        // (g - rate) or (g - rate)^2 + freq^2
        const std::vector<double> factor = r.freq == 0.0
            ? std::vector<double>{-r.rate, 1.0}
            : std::vector<double>{r.rate * r.rate + r.freq * r.freq, -2.0 * r.rate, 1.0};
        for (int k = 0; k < r.mult; ++k) poly = poly_multiply(poly, factor);
    }
    AnnihilatorPoly m;
    m.coeffs = poly;
    m.degree = static_cast<int>(poly.size()) - 1;
    return m;
}

}  // namespace

AnnihilatorPoly annihilator(const QEFunction& f) {
    if (f.is_zero()) throw std::invalid_argument("no minimal annihilator: zero function");
    std::vector<Root> roots;
    collect_roots(f, roots);
    return expand(roots);
}

AnnihilatorPoly common_annihilator(const std::vector<QEFunction>& fs) {
    std::vector<Root> roots;
    for (const auto& f : fs) collect_roots(f, roots);
    if (roots.empty()) throw std::invalid_argument("no minimal annihilator: all functions are zero");
    return expand(roots);
}

int krylov_dimension(const QEFunction& f) {
    if (f.is_zero()) return 0;
    return annihilator(f).degree;
}

QEFunction apply_polynomial(const AnnihilatorPoly& m, const QEFunction& f) {
    QEFunction acc;
    QEFunction dk = f;
    for (std::size_t h = 0; h < m.coeffs.size(); ++h) {
        acc += dk * m.coeffs[h];
        dk = derive(dk);
    }
    return acc;
}

}  // namespace mchjm
