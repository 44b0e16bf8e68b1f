#pragma once

#include <vector>

namespace medsens {

// Gauss-Hermite rule in the physicists' convention (weight function e^{-x^2}).
// Nodes are strictly increasing and symmetric about 0; weights are positive
// and sum to sqrt(pi). Integrating against a N(mean, sd^2) density is the
// caller's job via the change of variables z = mean + sqrt(2)*sd*node with
// weights node_weight/sqrt(pi).
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    int order = 0;
};

// Computes the order-point rule by eigendecomposition of the Hermite
// recurrence's Jacobi matrix. 1 <= order <= 64.
QuadratureRule gauss_hermite_rule(int order);

}  // namespace medsens
