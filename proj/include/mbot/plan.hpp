#pragma once

#include <iosfwd>

#include "mbot/marginal.hpp"
#include "mbot/matrix.hpp"

namespace mbot {

// Coupling matrix together with its marginal targets.  Storage (dense or
// support-indexed sparse) is chosen by the producer and never converted
// implicitly, so complexity accounting stays auditable.
struct Plan {
    MatrixStorage data;
    Marginal row_target;
    Marginal col_target;

    Plan() : data(DenseMatrix{}) {}
    Plan(MatrixStorage d, Marginal rt, Marginal ct);

    std::size_t rows() const { return storage_rows(data); }
    std::size_t cols() const { return storage_cols(data); }
    bool is_dense() const { return std::holds_alternative<DenseMatrix>(data); }
    double at(std::size_t j, std::size_t k) const { return storage_at(data, j, k); }
    double total_mass() const { return storage_sum(data); }

    std::vector<double> row_sums() const;
    std::vector<double> col_sums() const;
};

// max(∞-norm row-sum error, ∞-norm column-sum error)
double marginal_violation(const Plan& plan);

// d = min{√m‖a‖∞, √n‖b‖∞}; any two feasible plans are within 2d in Frobenius norm.
double diameter_bound(const Marginal& a, const Marginal& b);

// Coordinate text format: header "m n nnz", then "row col value" lines
// (0-based indices, %.17g values).
void write_plan_coo(std::ostream& os, const Plan& plan);
// Reads the coordinate format back as a sparse-storage plan with the given targets.
Plan read_plan_coo(std::istream& is, Marginal row_target, Marginal col_target);

}  // namespace mbot
