#pragma once

// Numerical differential geometry on the multi-curve state space: tangency
// (consistency) of parameterized families, Lie brackets, span dimensions of
// the generated algebra and commutation with the log-spread directions.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mchjm/hjm.hpp"
#include "mchjm/term_structures.hpp"

namespace mchjm {

struct ParamFamily {
    std::string name;
    int param_dim = 0;
    int m = 0;
    // G(z) as an analytic state
    std::function<MultiCurveState(const Eigen::VectorXd&)> point;
};

enum class Verdict { Consistent, Inconsistent, Inconclusive };
const char* to_string(Verdict v);
// consistent below 1e-6, inconsistent above 1e-4
Verdict classify_residual(double relative_residual);

struct TangencyReport {
    double drift_residual = 0.0;             // relative, weighted L2 over the grid
    std::vector<double> diffusion_residuals;  // one per factor
    double min_singular_ratio = 0.0;          // immersion diagnostic
    Verdict verdict = Verdict::Consistent;
};

// Central-difference Jacobian (step 1e-6 (1 + |z_k|)) of the flattened family.
Eigen::MatrixXd family_jacobian(const ParamFamily& family, const Eigen::VectorXd& z, const std::vector<double>& grid);

// Least-squares fit of mu_hat(G(z)) and each sigma_hat_i(G(z)) by the tangent
// space. Throws std::domain_error when the Jacobian is rank deficient.
TangencyReport tangency_residual(const ParamFamily& family, const VolatilitySpec& spec, const Eigen::VectorXd& z,
                                 const std::vector<double>& grid = default_grid());

struct HWFamilyParams {
    std::vector<double> a, sigma, beta;  // m+1, m+1, m
    int m() const { return static_cast<int>(beta.size()); }
    void validate() const;
    ConstantVolSpec spec() const;
};

// Modified Nelson-Siegel family z1 + z2 e^{-ax} + z3 x e^{-ax} + z4 e^{-2ax} per
// curve. Strategy 1 appends the log-spreads as free coordinates (dim 5m+4);
// strategy 2 determines them from the curve coordinates (dim 4(m+1), z3 > 0).
ParamFamily build_modified_ns_family(const HWFamilyParams& p, int strategy);
// Single-curve Nelson-Siegel z1 + z2 e^{-ax} + z3 x e^{-ax}.
ParamFamily build_plain_ns_family(double a);

struct Strategy2Report {
    std::vector<double> beta;  // sigma^j/a^j - sigma^0/a^0
    TangencyReport at_relation;
    TangencyReport perturbed;  // beta scaled by 1.1
};

Strategy2Report verify_strategy2_consistency(const std::vector<double>& a, const std::vector<double>& sigma,
                                             const Eigen::VectorXd& z, const std::vector<double>& grid = default_grid());

using VectorField = std::function<MultiCurveState(const MultiCurveState&)>;

VectorField drift_field(const VolatilitySpec& spec);           // Stratonovich drift
VectorField diffusion_field(const VolatilitySpec& spec, int i);  // sigma_hat_i

// [v1, v2](r) = D v1(r)[v2(r)] - D v2(r)[v1(r)], symmetric directional
// differences whose displacement has size fd_step (1 + |r|).
MultiCurveState lie_bracket_numeric(const VectorField& v1, const VectorField& v2, const MultiCurveState& state,
                                    double fd_step = 1e-2, const std::vector<double>& grid = default_grid());
VectorField lie_bracket_field(const VectorField& v1, const VectorField& v2, double fd_step = 1e-2,
                              const std::vector<double>& grid = default_grid());

// Numerical rank (relative SVD threshold 1e-8) of the fields together with
// their right-nested brackets up to the given depth (<= 3).
int span_dimension_estimate(const std::vector<VectorField>& fields, const MultiCurveState& state, int bracket_depth,
                            const std::vector<double>& grid = default_grid());

struct CommutationResult {
    int k = 0;
    double max_relative_norm = 0.0;
    bool commutes = true;
};

// [mu_hat, gamma_k] and [sigma_hat_i, gamma_k] for the constant field gamma_k = e_{Y^k}.
std::vector<CommutationResult> commutation_check(const VolatilitySpec& spec, const std::vector<int>& spread_indices,
                                                 const MultiCurveState& state,
                                                 const std::vector<double>& grid = default_grid());

// Weighted L2 norm (curves on the grid, spreads as is).
double state_norm(const MultiCurveState& s, const std::vector<double>& grid);

}  // namespace mchjm
