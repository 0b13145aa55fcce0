#pragma once

#include "mbot/matrix.hpp"
#include "mbot/plan.hpp"

namespace mbot {

struct LpResult {
    Plan plan;      // optimal vertex, sparse storage
    double value = 0.0;
    int pivots = 0;
};

// Exact optimal transport by the transportation simplex: north-west-corner
// start, MODI pricing, degeneracy broken by row-indexed mass perturbation.
// The final flows are re-solved on the optimal basis with the unperturbed
// marginals, so the returned vertex is feasible to machine precision.
LpResult transport_lp(const DenseMatrix& cost, const Marginal& a, const Marginal& b);

}  // namespace mbot
