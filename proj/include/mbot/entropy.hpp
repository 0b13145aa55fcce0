#pragma once

#include "mbot/matrix.hpp"
#include "mbot/plan.hpp"

namespace mbot {

// h(T) = Σ t_jk (log t_jk − 1) with 0·(log 0 − 1) := 0.
double neg_entropy(const MatrixStorage& t);
double neg_entropy(const Plan& t);

// Σ [t (log t − log t') − (t − t')]; +∞ whenever t_jk > 0 while t'_jk = 0.
double kl_divergence(const MatrixStorage& t, const MatrixStorage& t_ref);

// −h(a bᵀ); the entropy range bound used by the regularization-error lemma.
double product_entropy_bound(const Marginal& a, const Marginal& b);

}  // namespace mbot
