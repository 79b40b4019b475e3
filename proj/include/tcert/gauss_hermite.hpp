#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace tcert {

/// Gauss-Hermite rule for the physicists' weight: ∫ f(x) e^{-x²} dx ≈ Σ w_i f(x_i).
/// Nodes and weights come from the Golub-Welsch eigenvalue construction.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussHermite(int order);

    /// Process-wide cache; rules are immutable once built.
    static const GaussHermite& cached(int order);
};

/// Gauss-Legendre rule on [-1, 1]; used where an integrand has a known kink
/// and panel splitting restores spectral accuracy.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int order);
    static const GaussLegendre& cached(int order);
};

/// Tensorized Gauss-Hermite expectation against a d-dimensional Gaussian,
///   E[f(Z)],  Z ~ N(mean, L Lᵀ),
/// evaluated as π^{-d/2} Σ_I (Π_l w_{I_l}) f(mean + √2 L ξ_I), d ≤ 3.
class GaussianExpectation {
public:
    GaussianExpectation(int dim, int order);

    int dim() const { return dim_; }
    int order() const { return static_cast<int>(rule_->nodes.size()); }
    /// Number of tensor points (order^dim).
    std::size_t size() const { return points_.size() / dim_; }

    /// Raw standardized points ξ_I (row-major, size()*dim) and their combined
    /// weights already divided by π^{d/2}; Σ weights = 1.
    const std::vector<double>& xi() const { return points_; }
    const std::vector<double>& weight() const { return weights_; }

    template <class F>
    double integrate(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol, F&& f) const {
        const int d = dim_;
        Eigen::VectorXd z(d);
        double acc = 0.0;
        const std::size_t n = size();
        for (std::size_t p = 0; p < n; ++p) {
            for (int l = 0; l < d; ++l) {
                double shift = 0.0;
                for (int m = 0; m <= l; ++m) shift += chol(l, m) * points_[p * d + m];
                z[l] = mean[l] + kSqrt2 * shift;
            }
            acc += weights_[p] * f(z);
        }
        return acc;
    }

private:
    static constexpr double kSqrt2 = 1.4142135623730950488;
    int dim_;
    const GaussHermite* rule_;
    std::vector<double> points_;   // ξ values, row-major
    std::vector<double> weights_;  // normalized tensor weights
};

}  // namespace tcert
