#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "mbot/common.hpp"

namespace mbot {

// Plain row-major dense matrix.
struct DenseMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;

    DenseMatrix() = default;
    DenseMatrix(std::size_t m, std::size_t n, double fill = 0.0)
        : rows(m), cols(n), v(m * n, fill) {}

    double& at(std::size_t j, std::size_t k) { return v[j * cols + k]; }
    double at(std::size_t j, std::size_t k) const { return v[j * cols + k]; }
    const double* row(std::size_t j) const { return v.data() + j * cols; }
    double* row(std::size_t j) { return v.data() + j * cols; }
};

// CSR sparse matrix with sorted, unique column indices per row.
struct SparseMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<std::size_t> row_start;  // size rows + 1
    std::vector<std::uint32_t> col;
    std::vector<double> val;

    SparseMatrix() = default;
    SparseMatrix(std::size_t m, std::size_t n)
        : rows(m), cols(n), row_start(m + 1, 0) {}

    std::size_t nnz() const { return val.size(); }

    // Entry lookup by binary search; 0.0 when absent.
    double at(std::size_t j, std::size_t k) const;

    void validate() const;  // checks sortedness and uniqueness
};

using MatrixStorage = std::variant<DenseMatrix, SparseMatrix>;

// Builder used when entries arrive in row-major order already.
class SparseBuilder {
public:
    SparseBuilder(std::size_t m, std::size_t n) : mat_(m, n) {}

    // Rows and columns must be pushed in strictly increasing row-major order.
    void push(std::size_t j, std::size_t k, double value);
    SparseMatrix take();

private:
    SparseMatrix mat_;
    std::size_t cur_row_ = 0;
    bool row_open_ = false;
    std::uint32_t last_col_ = 0;
};

std::size_t storage_rows(const MatrixStorage& s);
std::size_t storage_cols(const MatrixStorage& s);
std::size_t storage_nnz(const MatrixStorage& s);
double storage_at(const MatrixStorage& s, std::size_t j, std::size_t k);
double storage_sum(const MatrixStorage& s);
double storage_max_abs(const MatrixStorage& s);

// Visits every stored entry in row-major order (dense: all m*n cells).
void for_each_entry(const MatrixStorage& s,
                    const std::function<void(std::size_t, std::size_t, double)>& fn);

// y = M x and y = M^T x.  Both iterate rows in order and accumulate in the
// same sequence for dense and full-support sparse inputs, so a sparsified
// kernel whose support is the whole grid reproduces the dense path bitwise.
void matvec(const MatrixStorage& s, const std::vector<double>& x, std::vector<double>& y);
void matvec_transposed(const MatrixStorage& s, const std::vector<double>& x,
                       std::vector<double>& y);

// out = A * B for dense operands (row-major, blocked, OpenMP over rows).
void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);

double dot(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace mbot
