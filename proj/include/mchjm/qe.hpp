#pragma once

// Quasi-exponential functions:
//   f(x) = sum_j e^{rate_j x} (p_j(x) cos(freq_j x) + q_j(x) sin(freq_j x))
// stored as exact term lists so that derivative, antiderivative, point
// evaluation and products stay inside the class without grid error.

#include <cstddef>
#include <string>
#include <vector>

namespace mchjm {

struct QETerm {
    double rate = 0.0;
    double freq = 0.0;
    std::vector<double> cos_poly;  // ascending degree
    std::vector<double> sin_poly;  // empty when freq == 0

    double evaluate(double x) const;
    int degree() const;  // max polynomial degree, -1 for an empty term
};

class QEFunction {
public:
    QEFunction() = default;
    explicit QEFunction(std::vector<QETerm> terms);

    static QEFunction constant(double c);
    // c * x^power * e^{rate x}
    static QEFunction exponential(double c, double rate, int power = 0);
    // e^{rate x} (c cos(freq x) + s sin(freq x))
    static QEFunction oscillating(double rate, double freq, double c, double s);

    const std::vector<QETerm>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    double max_abs_coefficient() const;

    double operator()(double x) const { return evaluate(x); }
    double evaluate(double x) const;

    QEFunction operator+(const QEFunction& o) const;
    QEFunction operator-(const QEFunction& o) const;
    QEFunction operator-() const;
    QEFunction operator*(double c) const;
    QEFunction operator*(const QEFunction& o) const;
    QEFunction& operator+=(const QEFunction& o);

    // x -> f(x + c)
    QEFunction shift(double c) const;

    // Equality of canonical forms up to an absolute coefficient tolerance.
    bool approx_equal(const QEFunction& o, double tol = 1e-12) const;

    std::string to_string() const;

private:
    void canonicalize();
    std::vector<QETerm> terms_;
};

inline QEFunction operator*(double c, const QEFunction& f) { return f * c; }

// Operators on the QE class.
QEFunction derive(const QEFunction& f);                 // F
QEFunction derive(const QEFunction& f, int k);          // F^k
QEFunction integrate_from_zero(const QEFunction& f);    // H
double eval_at_zero(const QEFunction& f);               // B
QEFunction multiply(const QEFunction& f, const QEFunction& g);
double evaluate(const QEFunction& f, double x);
// int_a^b f
double integral(const QEFunction& f, double a, double b);

struct AnnihilatorPoly {
    std::vector<double> coeffs;  // ascending, monic
    int degree = 0;

    // complex-free evaluation of M(gamma)
    double evaluate(double gamma) const;
};

AnnihilatorPoly annihilator(const QEFunction& f);
// Least common multiple of the annihilators of several functions, i.e. the
// minimal monic polynomial killing every nonzero function in the list.
AnnihilatorPoly common_annihilator(const std::vector<QEFunction>& fs);
int krylov_dimension(const QEFunction& f);
// sum_h coeffs[h] F^h f
QEFunction apply_polynomial(const AnnihilatorPoly& m, const QEFunction& f);

// Polynomial helpers shared with other modules.
std::vector<double> poly_multiply(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mchjm
