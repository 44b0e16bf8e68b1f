#include "medsens/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace medsens {

QuadratureRule gauss_hermite_rule(int order) {
    if (order < 1 || order > 64) {
        throw std::invalid_argument("gauss_hermite_rule: order must lie in [1, 64]");
    }
    const double sqrt_pi = std::sqrt(M_PI);
    QuadratureRule rule;
    rule.order = order;
    if (order == 1) {
        rule.nodes = {0.0};
        rule.weights = {sqrt_pi};
        return rule;
    }

    // Golub-Welsch: the Jacobi matrix for physicists' Hermite polynomials has
    // zero diagonal and off-diagonal sqrt(k/2).
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
    Eigen::VectorXd sub(order - 1);
    for (int k = 1; k < order; ++k) {
        sub(k - 1) = std::sqrt(k / 2.0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("gauss_hermite_rule: eigen decomposition failed");
    }

    rule.nodes.resize(order);
    rule.weights.resize(order);
    for (int i = 0; i < order; ++i) {
        rule.nodes[i] = solver.eigenvalues()(i);
        double v0 = solver.eigenvectors()(0, i);
        rule.weights[i] = sqrt_pi * v0 * v0;
    }

    // enforce exact symmetry of the computed rule
    for (int i = 0, j = order - 1; i < j; ++i, --j) {
        double node = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        rule.nodes[i] = -node;
        rule.nodes[j] = node;
        double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if (order % 2 == 1) {
        rule.nodes[order / 2] = 0.0;
    }
    return rule;
}

}  // namespace medsens
