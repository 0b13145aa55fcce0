#pragma once

#include <iosfwd>
#include <vector>

#include "mbot/common.hpp"

namespace mbot {

// One side of a transport polytope: nonnegative mass per atom.
class Marginal {
public:
    Marginal() = default;
    explicit Marginal(std::vector<double> masses);

    std::size_t size() const { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }
    const std::vector<double>& values() const { return w_; }
    double total() const { return total_; }
    double max() const { return max_; }

    void write(std::ostream& os) const;    // one value per line, %.17g
    static Marginal read(std::istream& is);

private:
    std::vector<double> w_;
    double total_ = 0.0;
    double max_ = 0.0;
};

Marginal uniform_marginal(std::size_t n, double total = 1.0);

}  // namespace mbot
