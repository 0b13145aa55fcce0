#include "mbot/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace mbot {

double SparseMatrix::at(std::size_t j, std::size_t k) const {
    const auto b = col.begin() + static_cast<std::ptrdiff_t>(row_start[j]);
    const auto e = col.begin() + static_cast<std::ptrdiff_t>(row_start[j + 1]);
    const auto it = std::lower_bound(b, e, static_cast<std::uint32_t>(k));
    if (it == e || *it != k) return 0.0;
    return val[static_cast<std::size_t>(it - col.begin())];
}

void SparseMatrix::validate() const {
    if (row_start.size() != rows + 1 || row_start.front() != 0 ||
        row_start.back() != val.size() || col.size() != val.size()) {
        throw ShapeError("sparse matrix: inconsistent CSR arrays");
    }
    for (std::size_t j = 0; j < rows; ++j) {
        for (std::size_t p = row_start[j]; p + 1 < row_start[j + 1]; ++p) {
            if (col[p] >= col[p + 1]) {
                throw DomainError("sparse matrix: columns not strictly increasing in row " +
                                  std::to_string(j));
            }
        }
        if (row_start[j] > row_start[j + 1]) throw ShapeError("sparse matrix: bad row_start");
    }
    for (double x : val) {
        if (!std::isfinite(x)) throw DomainError("sparse matrix: non-finite value");
    }
}

void SparseBuilder::push(std::size_t j, std::size_t k, double value) {
    if (j >= mat_.rows || k >= mat_.cols) throw ShapeError("sparse builder: index out of range");
    if (j < cur_row_ || (j == cur_row_ && row_open_ && k <= last_col_)) {
        throw DomainError("sparse builder: entries must arrive in row-major order");
    }
    while (cur_row_ < j) {
        mat_.row_start[cur_row_ + 1] = mat_.val.size();
        ++cur_row_;
        row_open_ = false;
    }
    mat_.col.push_back(static_cast<std::uint32_t>(k));
    mat_.val.push_back(value);
    last_col_ = static_cast<std::uint32_t>(k);
    row_open_ = true;
}

SparseMatrix SparseBuilder::take() {
    while (cur_row_ < mat_.rows) {
        mat_.row_start[cur_row_ + 1] = mat_.val.size();
        ++cur_row_;
    }
    return std::move(mat_);
}

std::size_t storage_rows(const MatrixStorage& s) {
    return std::visit([](const auto& m) { return m.rows; }, s);
}

std::size_t storage_cols(const MatrixStorage& s) {
    return std::visit([](const auto& m) { return m.cols; }, s);
}

std::size_t storage_nnz(const MatrixStorage& s) {
    if (const auto* d = std::get_if<DenseMatrix>(&s)) {
        std::size_t n = 0;
        for (double x : d->v) n += (x != 0.0);
        return n;
    }
    return std::get<SparseMatrix>(s).nnz();
}

double storage_at(const MatrixStorage& s, std::size_t j, std::size_t k) {
    return std::visit([&](const auto& m) { return m.at(j, k); }, s);
}

double storage_sum(const MatrixStorage& s) {
    double t = 0.0;
    if (const auto* d = std::get_if<DenseMatrix>(&s)) {
        for (double x : d->v) t += x;
    } else {
        for (double x : std::get<SparseMatrix>(s).val) t += x;
    }
    return t;
}

double storage_max_abs(const MatrixStorage& s) {
    double t = 0.0;
    if (const auto* d = std::get_if<DenseMatrix>(&s)) {
        for (double x : d->v) t = std::max(t, std::fabs(x));
    } else {
        for (double x : std::get<SparseMatrix>(s).val) t = std::max(t, std::fabs(x));
    }
    return t;
}

void for_each_entry(const MatrixStorage& s,
                    const std::function<void(std::size_t, std::size_t, double)>& fn) {
    if (const auto* d = std::get_if<DenseMatrix>(&s)) {
        for (std::size_t j = 0; j < d->rows; ++j) {
            for (std::size_t k = 0; k < d->cols; ++k) fn(j, k, d->at(j, k));
        }
        return;
    }
    const auto& m = std::get<SparseMatrix>(s);
    for (std::size_t j = 0; j < m.rows; ++j) {
        for (std::size_t p = m.row_start[j]; p < m.row_start[j + 1]; ++p) {
            fn(j, m.col[p], m.val[p]);
        }
    }
}

void matvec(const MatrixStorage& s, const std::vector<double>& x, std::vector<double>& y) {
    if (storage_cols(s) != x.size()) throw ShapeError("matvec: size mismatch");
    y.assign(storage_rows(s), 0.0);
    if (const auto* d = std::get_if<DenseMatrix>(&s)) {
        for (std::size_t j = 0; j < d->rows; ++j) {
            const double* r = d->row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < d->cols; ++k) acc += r[k] * x[k];
            y[j] = acc;
        }
        return;
    }
    const auto& m = std::get<SparseMatrix>(s);
    for (std::size_t j = 0; j < m.rows; ++j) {
        double acc = 0.0;
        for (std::size_t p = m.row_start[j]; p < m.row_start[j + 1]; ++p) {
            acc += m.val[p] * x[m.col[p]];
        }
        y[j] = acc;
    }
}

void matvec_transposed(const MatrixStorage& s, const std::vector<double>& x,
                       std::vector<double>& y) {
    if (storage_rows(s) != x.size()) throw ShapeError("matvec_transposed: size mismatch");
    y.assign(storage_cols(s), 0.0);
    if (const auto* d = std::get_if<DenseMatrix>(&s)) {
        for (std::size_t j = 0; j < d->rows; ++j) {
            const double* r = d->row(j);
            const double xj = x[j];
            for (std::size_t k = 0; k < d->cols; ++k) y[k] += r[k] * xj;
        }
        return;
    }
    const auto& m = std::get<SparseMatrix>(s);
    for (std::size_t j = 0; j < m.rows; ++j) {
        const double xj = x[j];
        for (std::size_t p = m.row_start[j]; p < m.row_start[j + 1]; ++p) {
            y[m.col[p]] += m.val[p] * xj;
        }
    }
}

void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
    out = DenseMatrix(a.rows, b.cols, 0.0);
    const std::size_t bs = 64;
#pragma omp parallel for schedule(static)
    for (std::size_t j0 = 0; j0 < a.rows; j0 += bs) {
        const std::size_t j1 = std::min(j0 + bs, a.rows);
        for (std::size_t l0 = 0; l0 < a.cols; l0 += bs) {
            const std::size_t l1 = std::min(l0 + bs, a.cols);
            for (std::size_t j = j0; j < j1; ++j) {
                double* oj = out.row(j);
                const double* aj = a.row(j);
                for (std::size_t l = l0; l < l1; ++l) {
                    const double ajl = aj[l];
                    if (ajl == 0.0) continue;
                    const double* bl = b.row(l);
                    for (std::size_t k = 0; k < b.cols; ++k) oj[k] += ajl * bl[k];
                }
            }
        }
    }
}

double dot(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("dot: shape mismatch");
    double t = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) t += a.v[i] * b.v[i];
    return t;
}

}  // namespace mbot
