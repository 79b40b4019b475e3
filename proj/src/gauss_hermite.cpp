#include "tcert/gauss_hermite.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace tcert {

GaussHermite::GaussHermite(int order) {
    if (order < 1) throw std::invalid_argument("Gauss-Hermite order must be >= 1");
    // Jacobi matrix for Hermite polynomials: zero diagonal, off-diagonal sqrt(j/2).
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int j = 1; j < order; ++j) {
        const double b = std::sqrt(j / 2.0);
        jacobi(j, j - 1) = b;
        jacobi(j - 1, j) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    const double mu0 = std::sqrt(M_PI);  // ∫ e^{-x²} dx
    nodes.resize(order);
    weights.resize(order);
    for (int j = 0; j < order; ++j) {
        nodes[j] = es.eigenvalues()[j];
        const double v0 = es.eigenvectors()(0, j);
        weights[j] = mu0 * v0 * v0;
    }
}

const GaussHermite& GaussHermite::cached(int order) {
    static std::mutex mu;
    static std::map<int, GaussHermite> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, GaussHermite(order)).first;
    return it->second;
}

GaussLegendre::GaussLegendre(int order) {
    if (order < 1) throw std::invalid_argument("Gauss-Legendre order must be >= 1");
    // Jacobi matrix for Legendre polynomials: zero diagonal, off-diagonal j/sqrt(4j^2-1).
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int j = 1; j < order; ++j) {
        const double b = j / std::sqrt(4.0 * j * j - 1.0);
        jacobi(j, j - 1) = b;
        jacobi(j - 1, j) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    nodes.resize(order);
    weights.resize(order);
    for (int j = 0; j < order; ++j) {
        nodes[j] = es.eigenvalues()[j];
        const double v0 = es.eigenvectors()(0, j);
        weights[j] = 2.0 * v0 * v0;
    }
}

const GaussLegendre& GaussLegendre::cached(int order) {
    static std::mutex mu;
    static std::map<int, GaussLegendre> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, GaussLegendre(order)).first;
    return it->second;
}

GaussianExpectation::GaussianExpectation(int dim, int order) : dim_(dim) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("tensor quadrature supports d in {1,2,3}");
    rule_ = &GaussHermite::cached(order);
    const int m = order;
    std::size_t total = 1;
    for (int l = 0; l < dim; ++l) total *= static_cast<std::size_t>(m);
    points_.resize(total * dim);
    weights_.resize(total);
    const double norm = std::pow(M_PI, -0.5 * dim);
    std::array<int, 3> idx{0, 0, 0};
    for (std::size_t p = 0; p < total; ++p) {
        double w = norm;
        for (int l = 0; l < dim; ++l) {
            points_[p * dim + l] = rule_->nodes[idx[l]];
            w *= rule_->weights[idx[l]];
        }
        weights_[p] = w;
        for (int l = dim - 1; l >= 0; --l) {
            if (++idx[l] < m) break;
            idx[l] = 0;
        }
    }
}

}  // namespace tcert
