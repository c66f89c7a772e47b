#pragma once

#include <array>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tanglide/tangential.hpp"

namespace tanglide {

/// A tangency manifold of a built-in model together with its closed-form oracles.
struct ManifoldEntry {
    std::string name;
    TangencyManifold manifold;
    bool admissible = true;  // anti-parallel pushforwards expected on M
    std::function<double(const Vec&)> lambda_oracle;
    std::function<Vec(const Vec&)> ztan_oracle;
    /// Random point on M (inside the admissible part when admissible).
    std::function<Vec(std::mt19937_64&)> sample;
};

struct ModelBundle {
    std::string name;
    PiecewiseSystem system;
    std::vector<ManifoldEntry> manifolds;
    Vec reference_point;  // a point on manifolds.front()

    const ManifoldEntry& manifold(const std::string& name) const;
};

// ---------------------------------------------------------------- fold-fold in R^4

struct FoldFoldParams {
    std::array<double, 4> a{2.0, 1.0, 3.0, -1.0};
    std::array<double, 4> b{-1.0, 2.0, 1.0, -1.0};
};

/// Z+ = (a1, a2, a3, a4 x1), Z- = (b1, b2, b3, b4 x1), h = x4, eta = (x4, x1).
/// Throws ConstraintError when a1 a4 b1 b4 = 0.
ModelBundle make_fold_fold(const FoldFoldParams& p = {});

// ---------------------------------------------------------------- multiplicity chain in R^n

struct ChainParams {
    int n = 5;
    int l = 4;  // contact order of Z+ at the origin
    int m = 3;  // contact order of Z- at the origin
    std::vector<double> a;  // a_1..a_{n-1}
    std::vector<double> b;  // b_1..b_{n-1}
};

/// Chain family: Z+_i = a_i x_{i+1} (i <= l-2), a_i (l-1 <= i <= n-1), Z+_n = x1, and Z- the same
/// with b and m. Manifolds "M2".."Mm" use Lie-built eta = (h, Z+h, ..., Z+^{k-1}h).
ModelBundle make_lie_chain(const ChainParams& p);

/// Random chain coefficients in +-[0.5, 2] with a_{k-1} b_{k-1} < 0 for 2 <= k < m.
ChainParams random_chain_params(int n, int l, int m, std::mt19937_64& rng);

/// Hand-derived Lie ladder of the chain: Z_side^i h at x for i = 0..order.
std::vector<double> chain_lie_ladder(const ChainParams& p, Side side, const Vec& x, int order);

struct ChainObstruction {
    ConeCase engine_case = ConeCase::empty;
    bool contradiction = false;  // anti-parallelism would need a_1..a_{m-2} b_{m-1} = 0
    double blocking_component = 0.0;
};

/// Evaluates the cone intersection on the manifold of contact order m+1 of Z+ at a point of it.
ChainObstruction check_chain_obstruction(const ChainParams& p, const Vec& x);
/// Random point on the order-(m+1) manifold (x_1..x_m = 0, x_n = 0, x_{m+1} != 0).
Vec sample_chain_obstruction_point(const ChainParams& p, std::mt19937_64& rng);

// ---------------------------------------------------------------- HIV intermittent treatment in R^3

struct HivParams {
    double s = 1.0;
    double k = 1.0;
    double alpha = 0.2;
    double delta = 0.5;
    double theta = 2.0;
    double c = 1.0;
    double eta_rt = 0.5;
    double eta_pi = 0.6;
    double C_T = 2.4;
};

enum class HivChart { original, adapted };

/// How parameters are validated by make_hiv.
enum class HivValidation {
    corrected,  // biological constraints with the upper bound s/alpha
    geometric,  // only what the tangency geometry needs: alpha < delta, s/delta < C_T < s/alpha, 0 < eta < 1
};

struct ConstraintCheck {
    std::string inequality;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// The constraints exactly as usually stated (upper bound min{s/delta, ...}); reported one by one.
std::vector<ConstraintCheck> check_hiv_constraints_printed(const HivParams& p);
std::vector<ConstraintCheck> check_hiv_constraints(const HivParams& p, HivValidation mode = HivValidation::corrected);

HivParams hiv_default_params();

/// original: states x1 x2 x3, h = x1 + x2 - C_T; adapted: y1 = h, y2 = Z+h, y3 = x3, h = y1.
/// Manifolds: "M2" with explicit eta, plus "M2_lie" (original chart) with Lie-built eta.
ModelBundle make_hiv(const HivParams& p, HivChart chart, HivValidation validation = HivValidation::corrected);

/// Coordinate change original -> adapted and its (constant) Jacobian.
Vec hiv_to_adapted(const HivParams& p, const Vec& x);
Vec hiv_from_adapted(const HivParams& p, const Vec& y);
Eigen::Matrix3d hiv_adapted_jacobian(const HivParams& p);

struct HivReference {
    double x1 = 0.0;           // tangency line x1
    double x2 = 0.0;           // tangency line x2
    double x3_plus = 0.0;      // cusp where Z+ has a cubic contact
    double x3_minus = 0.0;     // cusp where Z- has a cubic contact
    Vec pc_plus;
    Vec pc_minus;
    double delta_disc = 0.0;   // discriminant of the equilibrium quadratic
    double p2_star = 0.0;      // third coordinate of the closed-form equilibrium
};

/// Closed-form special quantities. Throws DomainError when the discriminant is negative.
HivReference hiv_reference_quantities(const HivParams& p);

/// Closed forms along the tangency line, parametrized by x3 (= y3).
double hiv_lambda_x_chart(const HivParams& p, double x3);
double hiv_lambda_y_chart(const HivParams& p, double y3);
double hiv_ztan_x_chart(const HivParams& p, double x3);   // third component, original chart
double hiv_ztan_y_chart(const HivParams& p, double y3);   // third component, adapted chart
/// Argument of phi^-1 in the closed-form S^tan graph.
double hiv_stan_argument(const HivParams& p, double u);

}  // namespace tanglide
