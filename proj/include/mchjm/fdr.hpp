#pragma once

// Finite-dimensional realizations r_hat_t = G(Z_t): embeddings, state SDE
// coefficients, Heun integration of the Stratonovich state dynamics, and
// benchmark (observable) coordinates.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mchjm/hjm.hpp"
#include "mchjm/qe.hpp"
#include "mchjm/term_structures.hpp"

namespace mchjm {

struct FDRRealization {
    std::string kind;
    int n = 0;  // state dimension
    int m = 0;  // number of spreads
    int d = 0;  // Brownian dimension
    bool time_coordinate = true;  // z[0] is calendar time (drift 1, no diffusion)

    // G(z, .) as an analytic state (QE curves + log-spreads)
    std::function<MultiCurveState(const Eigen::VectorXd&)> embed;
    // Stratonovich drift a(z) and diffusion b(z) (n x d)
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> diffusion;

    MultiCurveState initial_point;
    std::vector<double> theta;
    // per-factor annihilators (constant-vol builds) or per-block ones (CDV)
    std::vector<AnnihilatorPoly> annihilators;

    // Curve values and log-spreads of G(z) on a grid: [curve][node], spreads.
    void values(const Eigen::VectorXd& z, const std::vector<double>& grid, std::vector<std::vector<double>>& curves,
                std::vector<double>& spreads) const;
};

// General constant-volatility realization; `initial` must hold analytic curves.
FDRRealization build_constant_vol_fdr(const ConstantVolSpec& spec, const MultiCurveState& initial);

// Three-curve Hull-White parameters in calibration order.
struct Theta {
    double a0 = 0.0, sigma0 = 0.0, a1 = 0.0, sigma1 = 0.0, a2 = 0.0, sigma2 = 0.0, beta1 = 0.0, beta2 = 0.0;

    std::vector<double> to_vector() const { return {a0, sigma0, a1, sigma1, a2, sigma2, beta1, beta2}; }
    static Theta from_vector(const std::vector<double>& v);
    double a(int j) const { return j == 0 ? a0 : (j == 1 ? a1 : a2); }
    double sigma(int j) const { return j == 0 ? sigma0 : (j == 1 ? sigma1 : sigma2); }
    double beta(int j) const { return j == 0 ? 0.0 : (j == 1 ? beta1 : beta2); }
    // positivity and pairwise distinct rates (>= 1e-6)
    void validate() const;
    ConstantVolSpec spec() const;
};

// Closed-form three-curve Hull-White embedding with Nelson-Siegel initial
// curves r^M_j(x) = y0 + y1 e^{-a^j x} + y2 x e^{-a^j x} (common y) and
// initial log-spreads yM. State z = (z^0, z^0_1, z^1_1, z^2_1, z^3_1).
class HW3Embedding {
public:
    HW3Embedding(const Theta& theta, const std::array<double, 2>& yM);

    double forward(int j, const double* z, const double* y, double x) const;
    // int_0^x G^j(z, u) du
    double forward_integral(int j, const double* z, const double* y, double x) const;
    // G^{2+j}(z), j = 1, 2
    double log_spread(int j, const double* z, const double* y) const;

    // The same maps in reduced coordinates (t, b, w) with b = z^0_1 and
    // w_j = z^0_1 - a^j z^1_1 + (a^j)^2 z^2_1 - (a^j)^3 z^3_1; well conditioned
    // even when the rates nearly coincide.
    double reduced_coordinate(int j, const double* z) const;
    double forward_reduced(int j, double t, double w, const double* y, double x) const;
    double forward_integral_reduced(int j, double t, double w, const double* y, double x) const;
    double log_spread_reduced(int j, double t, double b, const double* w, const double* y) const;
    // z = (t, z_1) from (t, b, w); a Vandermonde solve, ill conditioned when rates nearly coincide
    std::array<double, 5> state_from_reduced(double t, double b, const double* w) const;
    const Theta& theta() const { return th_; }
    const std::array<double, 2>& initial_spreads() const { return yM_; }

private:
    Theta th_;
    std::array<double, 2> yM_;
};

FDRRealization build_hw3_fdr(const Theta& theta, const std::array<double, 3>& y, const std::array<double, 2>& yM);

struct CDVParams {
    std::array<double, 3> sigma{}, a{};
    double beta11 = 0.0, beta12 = 0.0, beta21 = 0.0, beta23 = 0.0;
};

// The model with volatility rows (sigma^0 e^{-a^0 x},0,0), (0,sigma^1 e^{-a^1 x},0),
// (0,0,sigma^2 e^{-a^2 x}), (beta11, beta12 Y^1, 0), (beta21, 0, beta23 Y^2).
ConstantDirectionVolSpec cdv_example_spec(const CDVParams& p);
FDRRealization build_cdv_example_fdr(const CDVParams& p, const MultiCurveState& initial);

struct StatePaths {
    std::vector<double> times;
    std::vector<std::vector<Eigen::VectorXd>> z;  // [path][step]
};

// Heun (stochastic midpoint) integration; increments, when given, are used verbatim.
StatePaths simulate_state(const FDRRealization& fdr, const SimConfig& cfg, const Eigen::VectorXd& z0,
                          const BrownianIncrements* increments = nullptr);

struct BenchmarkResult {
    Eigen::MatrixXd K;
    double condition = 0.0;
    bool invertible = false;
    // z -> (alpha^h . G(z, x_h))_h
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> observables;
    // inverse map by Newton iteration started at the reference state
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> state_from_observables;
};

using CoefficientSet = std::vector<Eigen::VectorXd>;  // n vectors in R^{2m+1}

BenchmarkResult benchmark_coordinates(const FDRRealization& fdr, const Eigen::VectorXd& z,
                                      const std::vector<double>& maturities, const CoefficientSet& coeffs);

struct CoefficientSearch {
    CoefficientSet best;
    double best_condition = 0.0;
    std::vector<double> trial_conditions;
};

CoefficientSearch choose_benchmark_coefficients(const FDRRealization& fdr, const Eigen::VectorXd& z,
                                                const std::vector<double>& maturities, int trials,
                                                std::uint64_t seed);

}  // namespace mchjm
