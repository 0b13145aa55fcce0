#pragma once

#include "mbot/oracle.hpp"
#include "mbot/system.hpp"

namespace mbot {

// Objective oracle for the penalized pairwise-coupling problem
//   Σ_i ⟨Y_i, C + βΛ^{-1}⟩ + Σ_{i<j} ⟨Y_i, Λ^{-1} Y_j C + β Λ^{-2} Y_j⟩
// over blocks Y_i ∈ U(ϱ, ϱ), one block per electron beyond the first.
class MmotOracle final : public ObjectiveOracle {
public:
    explicit MmotOracle(const DiscreteSystem& sys);

    std::size_t block_count() const override { return sys_->block_count(); }
    std::pair<std::size_t, std::size_t> block_shape(std::size_t) const override {
        return {sys_->size(), sys_->size()};
    }
    double objective(std::span<const Plan> y) const override;
    DenseMatrix block_gradient(std::size_t i, std::span<const Plan> y) const override;
    bool has_cheap_gradient_entries() const override { return true; }
    double gradient_entry(std::size_t i, std::span<const Plan> y, std::size_t j,
                          std::size_t k) const override;

    const DiscreteSystem& system() const { return *sys_; }
    std::vector<std::pair<Marginal, Marginal>> marginals() const;
    // Λ^{-1} diagonal, the row weights of the outer-loop stopping metric.
    std::vector<double> delta_weights() const;

private:
    const DiscreteSystem* sys_;
    std::vector<double> inv_rho_;
};

// v := mean of the dual v-potentials, shifted so min v = 0.
std::vector<double> sce_potential(const std::vector<std::vector<double>>& dual_v);

struct MappedPoint {
    std::size_t source = 0;                 // atom index
    std::array<double, 3> src{0, 0, 0};
    std::array<double, 3> img{0, 0, 0};
};

// Barycentric transport images 𝒯_i(d_j) = Σ_k y_jk d_k / ϱ_j; rows whose mass
// was truncated away are skipped.
std::vector<MappedPoint> ot_map(const Plan& y, const DiscreteSystem& sys);

struct ErrorMetrics {
    double err_obj = 0.0;
    double err_sce = 0.0;
};

ErrorMetrics error_metrics(double obj, double obj_star, std::span<const double> v,
                           std::span<const double> v_star);

}  // namespace mbot
