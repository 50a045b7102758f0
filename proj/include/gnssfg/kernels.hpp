#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <variant>
#include <vector>

#include "gnssfg/errors.hpp"
#include "gnssfg/keys.hpp"

namespace gnssfg {

// ---------------------------------------------------------------------------
// Kernel variants
// ---------------------------------------------------------------------------

struct L2Kernel {};

struct HuberKernel {
    double delta = 1.345;  // 95%-efficiency default, whitened units
};

struct CauchyKernel {
    double c = 2.3849;
};

/// Marker for factors rewired to a switch variable. The scaling happens
/// structurally inside the factor residual, not through an IRLS weight.
struct SwitchLinkedKernel {
    VariableKey switch_key;
};

struct DcsKernel {
    double phi = 1.0;
};

struct MaxMixtureComponent {
    double weight = 1.0;    // mixture weight; weights need not sum to 1
    double variance = 1.0;  // variance scale relative to the base noise
};

struct MaxMixtureKernel {
    std::vector<MaxMixtureComponent> components;
};

/// Geman-McClure base for graduated non-convexity. mu is the homotopy
/// parameter; mu = 1 is the target cost, larger mu is closer to quadratic.
struct GncKernel {
    double c = 3.0;
    double mu = 1.0;
};

using RobustKernel = std::variant<L2Kernel, HuberKernel, CauchyKernel, SwitchLinkedKernel,
                                  DcsKernel, MaxMixtureKernel, GncKernel>;

// ---------------------------------------------------------------------------
// Scalar kernel functions
// ---------------------------------------------------------------------------

/// Huber loss: quadratic inside |z| <= delta, linear growth outside.
/// Continuous and C1 at the branch point.
inline double huber_rho(double z, double delta) {
    if (!(delta > 0)) throw KernelMisuse("huber delta must be positive");
    const double az = std::abs(z);
    if (az <= delta) return 0.5 * z * z;
    return delta * az - 0.5 * delta * delta;
}

inline double cauchy_rho(double z, double c) {
    const double u = z / c;
    return 0.5 * c * c * std::log1p(u * u);
}

/// Geman-McClure surrogate at homotopy parameter mu.
inline double geman_mcclure_rho(double z, double c, double mu) {
    const double z2 = z * z;
    const double mc2 = mu * c * c;
    return 0.5 * mc2 * z2 / (z2 + mc2);
}

/// Dynamic covariance scaling factor s in (0,1]; s = 1 exactly when the
/// squared whitened residual is within phi. The factor's information is
/// scaled by s^2.
inline double dcs_scale(double residual_sq, double phi) {
    if (!(phi > 0)) throw KernelMisuse("dcs phi must be positive");
    if (residual_sq < 0) throw KernelMisuse("residual_sq must be nonnegative");
    return std::min(1.0, 2.0 * phi / (phi + residual_sq));
}

/// Closed-form minimizer over w in [0,1] of  w*r^2 + mu*c^2*(sqrt(w)-1)^2.
inline double gnc_weight(double residual_sq, double mu, double c) {
    if (!(mu > 0) || !(c > 0)) throw KernelMisuse("gnc mu and c must be positive");
    const double mc2 = mu * c * c;
    const double w = mc2 / (residual_sq + mc2);
    return w * w;
}

// ---------------------------------------------------------------------------
// Max-mixture selection
// ---------------------------------------------------------------------------

struct MaxMixtureSelection {
    int index = 0;
    double cost = 0.0;  // NLS-compatible, shifted so the best component is >= 0 at r = 0
    double weight = 1.0;  // information scale of the selected component
};

/**
 * @brief Select the dominant mixture component for a whitened residual.
 *
 * Components scale the base (already whitened) noise, so component k models
 * r ~ N(0, variance_k * I). Selection maximizes w_k * N(r; 0, variance_k*I),
 * equivalently minimizes ||r||^2/variance_k - 2*log(w_k * variance_k^{-d/2}).
 * The returned cost is shifted by the smallest component log-normalizer so
 * costs stay nonnegative and comparable across component switches.
 */
inline MaxMixtureSelection maxmix_evaluate(const Eigen::VectorXd& whitened_residual,
                                           const std::vector<MaxMixtureComponent>& components) {
    if (components.empty()) throw KernelMisuse("max-mixture needs at least one component");
    const double d = static_cast<double>(whitened_residual.size());
    const double r2 = whitened_residual.squaredNorm();

    int best = -1;
    double best_cost = 0.0;
    double min_normalizer = 0.0;
    for (int k = 0; k < static_cast<int>(components.size()); ++k) {
        const auto& comp = components[k];
        if (!(comp.weight > 0) || !(comp.variance > 0))
            throw KernelMisuse("max-mixture weights and variances must be positive");
        // -2 log(w_k * sqrt(det(Lambda_k))) with Lambda_k = I / variance_k
        const double normalizer = -2.0 * std::log(comp.weight) + d * std::log(comp.variance);
        const double cost = r2 / comp.variance + normalizer;
        if (best < 0 || cost < best_cost) {
            best = k;
            best_cost = cost;
        }
        if (k == 0 || normalizer < min_normalizer) min_normalizer = normalizer;
    }
    return {best, best_cost - min_normalizer, 1.0 / components[best].variance};
}

// ---------------------------------------------------------------------------
// IRLS weights and per-factor costs
// ---------------------------------------------------------------------------

/// IRLS weight w(z) = rho'(z)/z for the weight-representable kernels.
/// SwitchLinked kernels are handled structurally, never through a weight.
inline double kernel_weight(const RobustKernel& kernel, double z) {
    const double az = std::abs(z);
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, L2Kernel>) {
                return 1.0;
            } else if constexpr (std::is_same_v<K, HuberKernel>) {
                return az <= k.delta ? 1.0 : k.delta / az;
            } else if constexpr (std::is_same_v<K, CauchyKernel>) {
                const double u = az / k.c;
                return 1.0 / (1.0 + u * u);
            } else if constexpr (std::is_same_v<K, DcsKernel>) {
                const double s = dcs_scale(az * az, k.phi);
                return s * s;
            } else if constexpr (std::is_same_v<K, MaxMixtureKernel>) {
                Eigen::VectorXd r(1);
                r(0) = az;
                return maxmix_evaluate(r, k.components).weight;
            } else if constexpr (std::is_same_v<K, GncKernel>) {
                return gnc_weight(az * az, k.mu, k.c);
            } else {
                throw KernelMisuse("switch-linked kernels carry no IRLS weight");
            }
        },
        kernel);
}

/// Per-factor IRLS weight computed from the full whitened residual vector.
/// Matches kernel_weight(kernel, ||r||) except for max-mixtures, where the
/// residual dimension enters the component log-normalizers.
inline double kernel_weight_vec(const RobustKernel& kernel, const Eigen::VectorXd& residual) {
    if (const auto* mm = std::get_if<MaxMixtureKernel>(&kernel))
        return maxmix_evaluate(residual, mm->components).weight;
    return kernel_weight(kernel, residual.norm());
}

/// Contribution of one factor to the robust total cost. L2 (and structurally
/// switch-scaled) factors contribute the plain squared norm; M-estimator
/// kernels contribute rho(||r||); DCS contributes the s^2-scaled squared
/// norm; max-mixtures contribute the selected component's shifted cost.
inline double kernel_cost(const RobustKernel& kernel, const Eigen::VectorXd& residual) {
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, L2Kernel>) {
                return residual.squaredNorm();
            } else if constexpr (std::is_same_v<K, HuberKernel>) {
                return huber_rho(residual.norm(), k.delta);
            } else if constexpr (std::is_same_v<K, CauchyKernel>) {
                return cauchy_rho(residual.norm(), k.c);
            } else if constexpr (std::is_same_v<K, DcsKernel>) {
                // Penalty-inclusive switch cost at the closed-form scale:
                // quadratic inside phi, saturating at 3*phi outside. Its IRLS
                // weight is exactly s^2, matching the information scaling.
                const double r2 = residual.squaredNorm();
                if (r2 <= k.phi) return r2;
                return 3.0 * k.phi - 4.0 * k.phi * k.phi / (k.phi + r2);
            } else if constexpr (std::is_same_v<K, MaxMixtureKernel>) {
                return maxmix_evaluate(residual, k.components).cost;
            } else if constexpr (std::is_same_v<K, GncKernel>) {
                return geman_mcclure_rho(residual.norm(), k.c, k.mu);
            } else {
                return residual.squaredNorm();  // switch-linked: scaling is in the residual
            }
        },
        kernel);
}

inline bool is_switch_linked(const RobustKernel& kernel) {
    return std::holds_alternative<SwitchLinkedKernel>(kernel);
}

}  // namespace gnssfg
