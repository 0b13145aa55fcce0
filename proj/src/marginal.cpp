#include "mbot/marginal.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

namespace mbot {

Marginal::Marginal(std::vector<double> masses) : w_(std::move(masses)) {
    if (w_.empty()) throw DomainError("marginal: empty mass vector");
    for (double x : w_) {
        if (!std::isfinite(x)) throw DomainError("marginal: non-finite mass");
        if (x < 0.0) throw DomainError("marginal: negative mass");
        total_ += x;
        if (x > max_) max_ = x;
    }
    if (!(max_ > 0.0)) throw DomainError("marginal: all masses are zero");
    if (!std::isfinite(total_)) throw DomainError("marginal: infinite total mass");
}

void Marginal::write(std::ostream& os) const {
    char buf[40];
    for (double x : w_) {
        std::snprintf(buf, sizeof(buf), "%.17g\n", x);
        os << buf;
    }
}

Marginal Marginal::read(std::istream& is) {
    std::vector<double> w;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        w.push_back(std::stod(line));
    }
    return Marginal(std::move(w));
}

Marginal uniform_marginal(std::size_t n, double total) {
    return Marginal(std::vector<double>(n, total / static_cast<double>(n)));
}

}  // namespace mbot
