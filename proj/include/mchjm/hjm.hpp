#pragma once

// Volatility specifications, risk-neutral drifts (Ito and Stratonovich) and
// Euler-Maruyama simulation of the grid-discretized multi-curve dynamics.

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "mchjm/qe.hpp"
#include "mchjm/term_structures.hpp"

namespace mchjm {

class ScalarField {
public:
    enum class Kind { Constant, AffineLogSpread, Custom };

    ScalarField() = default;
    static ScalarField constant(double c);
    // c0 + c1 * Y^k, k in 1..m
    static ScalarField affine(double c0, double c1, int k);
    static ScalarField custom(std::function<double(const MultiCurveState&)> f);

    Kind kind() const { return kind_; }
    double c0() const { return c0_; }
    double c1() const { return c1_; }
    int index() const { return k_; }
    bool is_identically_zero() const;
    bool depends_on_curves() const { return kind_ == Kind::Custom; }

    double evaluate(const MultiCurveState& s) const;
    // Frechet derivative at s in direction v (analytic for affine fields,
    // symmetric difference with step 1e-6 (1 + |s|) for custom ones)
    double derivative(const MultiCurveState& s, const MultiCurveState& v) const;

private:
    Kind kind_ = Kind::Constant;
    double c0_ = 0.0, c1_ = 0.0;
    int k_ = 0;
    std::function<double(const MultiCurveState&)> f_;
};

struct ConstantVolSpec {
    int m = 0, d = 1;
    std::vector<std::vector<QEFunction>> sigma;  // (m+1) x d
    std::vector<std::vector<double>> beta;       // m x d

    void validate() const;
};

struct ConstantDirectionVolSpec {
    int m = 0, d = 1;
    std::vector<std::vector<QEFunction>> lambda;  // (m+1) x d
    std::vector<std::vector<ScalarField>> phi;    // (m+1) x d
    std::vector<std::vector<ScalarField>> beta;   // m x d

    void validate() const;
    // throws if a structurally active phi or beta vanishes at s
    void check_nonzero(const MultiCurveState& s) const;
};

using VolatilitySpec = std::variant<ConstantVolSpec, ConstantDirectionVolSpec>;

int spec_m(const VolatilitySpec& spec);
int spec_d(const VolatilitySpec& spec);
// Constant-vol spec seen as constant direction with phi = 1 and constant beta.
ConstantDirectionVolSpec as_constant_direction(const ConstantVolSpec& spec);

// Three-curve (or general m) Hull-White: sigma^j e^{-a^j x}, d = 1.
ConstantVolSpec hull_white_spec(const std::vector<double>& a, const std::vector<double>& sigma,
                                const std::vector<double>& beta);

// i-th diffusion field sigma_hat_i(state), same representation as the state
MultiCurveState volatility_field(const MultiCurveState& state, const VolatilitySpec& spec, int i);
MultiCurveState ito_drift(const MultiCurveState& state, const VolatilitySpec& spec);
MultiCurveState stratonovich_drift(const MultiCurveState& state, const VolatilitySpec& spec);

struct SimConfig {
    double dt = 1e-3;
    double horizon = 1.0;
    int n_paths = 1;
    std::uint64_t seed = 20240917ULL;
    std::vector<double> grid = default_grid();
    // times at which full states are stored (default: horizon only)
    std::vector<double> record_times;
    // additive corruption of every forward-rate drift (negative controls)
    double drift_shift = 0.0;

    int steps() const;
    void validate() const;
    // step index of each record time
    std::vector<int> record_steps() const;
};

// Brownian increments, [path][step][factor], from per-path seeded streams.
struct BrownianIncrements {
    int n_paths = 0, steps = 0, d = 0;
    double dt = 0.0;
    std::vector<double> dw;

    double at(int path, int step, int i) const {
        return dw[(static_cast<std::size_t>(path) * static_cast<std::size_t>(steps) + static_cast<std::size_t>(step)) *
                      static_cast<std::size_t>(d) +
                  static_cast<std::size_t>(i)];
    }
    // sum consecutive pairs: the same paths on a grid with twice the step
    BrownianIncrements coarsen() const;
};

BrownianIncrements generate_increments(int n_paths, int steps, int d, double dt, std::uint64_t seed);

struct PathSet {
    std::vector<double> times;                            // recorded times
    std::vector<std::vector<MultiCurveState>> states;     // [path][time]
    std::vector<std::vector<double>> log_bank;            // [path][time], int_0^t r^0_s(0) ds
    std::vector<MultiCurveState> initial;                 // time-0 state (sampled)
};

using StepObserver = std::function<void(int path, int step, double t, const MultiCurveState& state)>;

// Ito Euler-Maruyama on cfg.grid with upwind F and flat extrapolation.
PathSet simulate_hjm(const MultiCurveState& initial, const VolatilitySpec& spec, const SimConfig& cfg,
                     const BrownianIncrements* increments = nullptr, const StepObserver& observer = {});

struct MartingaleStat {
    double mean = 0.0;
    double stderr_ = 0.0;
    double z = 0.0;
    double target = 0.0;  // time-0 value
};

// j = 0: B^0_t(T)/S^0_t; j >= 1: S^j_t B^j_t(T)/S^0_t. z is reported as 0
// when the sample has zero spread (deterministic model).
MartingaleStat martingale_check(const PathSet& paths, int j, double t, double T);

}  // namespace mchjm
