#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mbot/mmot.hpp"
#include "mbot/oracle1d.hpp"
#include "mbot/transport_lp.hpp"

using namespace mbot;
using namespace mbot::testing;

namespace {

Density uniform_density(double lo, double hi, int ne) {
    Density d;
    d.dim = 1;
    d.lo = {lo, 0, 0};
    d.hi = {hi, 0, 0};
    d.gaussians = {{1.0, 0.0, {0, 0, 0}}};  // α = 0: constant density
    d.n_electrons = ne;
    return d;
}

// Objective evaluated by plain dense triple loops, no shared code paths.
double reference_objective(const std::vector<DenseMatrix>& y, const DiscreteSystem& sys) {
    const std::size_t n = sys.size();
    double f = 0.0;
    for (const DenseMatrix& yi : y) {
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t l = 0; l < n; ++l) {
                f += yi.at(k, l) * sys.cost(k, l);
                if (k == l) f += sys.beta * yi.at(k, l) / sys.rho[k];
            }
        }
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t j = i + 1; j < y.size(); ++j) {
            for (std::size_t k = 0; k < n; ++k) {
                for (std::size_t l = 0; l < n; ++l) {
                    double inner = 0.0;
                    for (std::size_t lp = 0; lp < n; ++lp) {
                        inner += y[j].at(k, lp) * sys.cost(lp, l);
                    }
                    f += y[i].at(k, l) * (inner / sys.rho[k] +
                                          sys.beta * y[j].at(k, l) / (sys.rho[k] * sys.rho[k]));
                }
            }
        }
    }
    return f;
}

DenseMatrix to_dense(const Plan& p) {
    DenseMatrix d(p.rows(), p.cols(), 0.0);
    for_each_entry(p.data, [&](std::size_t j, std::size_t k, double v) { d.at(j, k) = v; });
    return d;
}

}  // namespace

TEST_CASE("build_mesh equimass on a uniform density") {
    const Density d = uniform_density(0.0, 1.0, 2);
    const Mesh mesh = build_mesh(d, 4, MeshStyle::Equimass);
    REQUIRE(mesh.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(mesh.cells[i].hi[0] - mesh.cells[i].lo[0] == doctest::Approx(0.25).epsilon(1e-10));
        CHECK(mesh.mass[i] == doctest::Approx(0.25).epsilon(1e-10));
    }
    CHECK_THROWS_AS(build_mesh(system_density(5), 4, MeshStyle::Equimass), DomainError);
}

TEST_CASE("build_mesh equisize 30x30") {
    const Density d = system_density(5);
    const Mesh mesh = build_mesh(d, 900, MeshStyle::Equisize);
    REQUIRE(mesh.size() == 900);
    for (const Cell& c : mesh.cells) {
        CHECK((c.hi[0] - c.lo[0]) * (c.hi[1] - c.lo[1]) == doctest::Approx(0.04).epsilon(1e-12));
    }
    CHECK_THROWS_AS(build_mesh(d, 899, MeshStyle::Equisize), DomainError);
}

TEST_CASE("system 1 equimass masses are all equal") {
    const Density d = system_density(1);
    const Mesh mesh = build_mesh(d, 90, MeshStyle::Equimass);
    const double expect = d.total_mass() / 90.0;
    for (double m : mesh.mass) CHECK(m == doctest::Approx(expect).epsilon(1e-8));
    const DiscreteSystem sys = discretize(d, mesh);
    CHECK(sys.size() == 90);  // nothing truncated for equal masses
    double total = 0.0;
    for (double m : sys.rho) total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("discretize reproduces the reference truncation count for system 5") {
    const Density d = system_density(5);
    const Mesh mesh = build_mesh(d, 900, MeshStyle::Equisize);
    const DiscreteSystem sys = discretize(d, mesh);
    CHECK(sys.size() == 424);
}

TEST_CASE("discretize edge cases") {
    const Density d = uniform_density(0.0, 1.0, 2);
    const Mesh mesh = build_mesh(d, 2, MeshStyle::Equimass);
    // Threshold zero keeps everything.
    DiscretizeOptions keep_all;
    keep_all.truncation_rel = 0.0;
    CHECK(discretize(d, mesh, keep_all).size() == 2);

    // Single surviving atom still yields a valid (trivial) system.
    const Mesh m1 = build_mesh(uniform_density(0.0, 1.0, 2), 2, MeshStyle::Equisize);
    DiscretizeOptions opts;
    const DiscreteSystem sys = discretize(uniform_density(0.0, 1.0, 2), m1, opts);
    CHECK(sys.cost(0, 0) == 0.0);

    // Raising the threshold never increases the surviving count.
    const Density g = system_density(5);
    const Mesh mg = build_mesh(g, 900, MeshStyle::Equisize);
    std::size_t prev = 901;
    for (double th : {0.0, 1e-4, 1e-3, 5e-3, 2e-2}) {
        DiscretizeOptions o;
        o.truncation_rel = th;
        const std::size_t count = discretize(g, mg, o).size();
        CHECK(count <= prev);
        prev = count;
    }
}

TEST_CASE("coulomb cost is symmetric, zero-diagonal, exact") {
    const Density d = system_density(2);
    const Mesh mesh = build_mesh(d, 24, MeshStyle::Equimass);
    const DiscreteSystem sys = discretize(d, mesh);
    for (std::size_t k = 0; k < sys.size(); ++k) {
        CHECK(sys.cost(k, k) == 0.0);
        for (std::size_t l = k + 1; l < sys.size(); ++l) {
            const double dist = std::fabs(sys.bary[k][0] - sys.bary[l][0]);
            CHECK(sys.cost(k, l) == doctest::Approx(1.0 / dist).epsilon(1e-14));
            CHECK(sys.cost(k, l) == sys.cost(l, k));
            CHECK(sys.cost(k, l) > 0.0);
        }
    }
}

TEST_CASE("mmot objective: linear for two electrons, reference for more") {
    std::mt19937 gen(3);
    const Density d2 = uniform_density(-1.0, 1.0, 2);
    const Mesh mesh = build_mesh(d2, 8, MeshStyle::Equimass);
    const DiscreteSystem sys2 = discretize(d2, mesh);
    const MmotOracle oracle2(sys2);
    REQUIRE(oracle2.block_count() == 1);
    const Marginal rho = sys2.marginal();
    const Plan y = random_feasible(gen, rho, rho);
    double linear = 0.0;
    for_each_entry(y.data, [&](std::size_t j, std::size_t k, double v) {
        linear += v * sys2.cost(j, k);
        if (j == k) linear += sys2.beta * v / sys2.rho[j];
    });
    std::vector<Plan> blocks{y};
    CHECK(oracle2.objective(blocks) == doctest::Approx(linear).epsilon(1e-13));

    // Three electrons: matches the dense triple-loop reference, including on
    // the independent product coupling ϱϱᵀ.
    Density d3 = system_density(1);
    const Mesh m3 = build_mesh(d3, 10, MeshStyle::Equimass);
    const DiscreteSystem sys3 = discretize(d3, m3);
    const MmotOracle oracle3(sys3);
    REQUIRE(oracle3.block_count() == 2);
    const Marginal r3 = sys3.marginal();
    DenseMatrix outer(sys3.size(), sys3.size());
    for (std::size_t j = 0; j < sys3.size(); ++j) {
        for (std::size_t k = 0; k < sys3.size(); ++k) outer.at(j, k) = r3[j] * r3[k];
    }
    std::vector<Plan> prod{Plan(MatrixStorage(outer), r3, r3), Plan(MatrixStorage(outer), r3, r3)};
    CHECK(oracle3.objective(prod) ==
          doctest::Approx(reference_objective({outer, outer}, sys3)).epsilon(1e-12));

    std::vector<Plan> rnd{random_feasible(gen, r3, r3), random_feasible(gen, r3, r3)};
    CHECK(oracle3.objective(rnd) ==
          doctest::Approx(reference_objective({to_dense(rnd[0]), to_dense(rnd[1])}, sys3))
              .epsilon(1e-12));
}

TEST_CASE("mmot objective is symmetric in the blocks") {
    std::mt19937 gen(5);
    Density d = system_density(2);
    d.n_electrons = 4;  // three blocks
    const Mesh mesh = build_mesh(d, 9, MeshStyle::Equimass);
    const DiscreteSystem sys = discretize(d, mesh);
    const MmotOracle oracle(sys);
    const Marginal rho = sys.marginal();
    std::vector<Plan> y{random_feasible(gen, rho, rho), random_feasible(gen, rho, rho),
                        random_feasible(gen, rho, rho)};
    const double base = oracle.objective(y);
    std::vector<Plan> perm{y[2], y[0], y[1]};
    CHECK(oracle.objective(perm) == doctest::Approx(base).epsilon(1e-12));
    std::vector<Plan> swap{y[1], y[0], y[2]};
    CHECK(oracle.objective(swap) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("mmot gradient: constant for two electrons, finite differences beyond") {
    std::mt19937 gen(7);
    const Density d2 = uniform_density(-1.0, 1.0, 2);
    const DiscreteSystem sys2 = discretize(d2, build_mesh(d2, 6, MeshStyle::Equimass));
    const MmotOracle oracle2(sys2);
    const Marginal r2 = sys2.marginal();
    std::vector<Plan> y2{random_feasible(gen, r2, r2)};
    const DenseMatrix g2 = oracle2.block_gradient(0, y2);
    for (std::size_t j = 0; j < sys2.size(); ++j) {
        for (std::size_t k = 0; k < sys2.size(); ++k) {
            double expect = sys2.cost(j, k);
            if (j == k) expect += sys2.beta / sys2.rho[j];
            CHECK(g2.at(j, k) == doctest::Approx(expect).epsilon(1e-13));
        }
    }

    // K=12, three electrons, random feasible point: central differences at
    // h=1e-6 with a cross-check at h=1e-5.
    Density d3 = system_density(1);
    const DiscreteSystem sys = discretize(d3, build_mesh(d3, 12, MeshStyle::Equimass));
    const MmotOracle oracle(sys);
    const Marginal rho = sys.marginal();
    std::vector<Plan> y{random_feasible(gen, rho, rho), random_feasible(gen, rho, rho)};
    for (std::size_t block = 0; block < 2; ++block) {
        const DenseMatrix grad = oracle.block_gradient(block, y);
        std::mt19937 pick(11);
        for (int probe = 0; probe < 25; ++probe) {
            const std::size_t j = pick() % sys.size();
            const std::size_t k = pick() % sys.size();
            auto fd_at = [&](double h) {
                DenseMatrix plus = to_dense(y[block]), minus = to_dense(y[block]);
                plus.at(j, k) += h;
                minus.at(j, k) -= h;
                std::vector<Plan> yp = y, ym = y;
                yp[block] = Plan(MatrixStorage(plus), rho, rho);
                ym[block] = Plan(MatrixStorage(minus), rho, rho);
                return (oracle.objective(yp) - oracle.objective(ym)) / (2.0 * h);
            };
            const double fd6 = fd_at(1e-6);
            const double fd5 = fd_at(1e-5);
            CHECK(grad.at(j, k) == doctest::Approx(fd6).epsilon(1e-6));
            CHECK(grad.at(j, k) == doctest::Approx(fd5).epsilon(1e-5));
        }
        // Entrywise access agrees with the dense gradient.
        std::mt19937 pick2(13);
        for (int probe = 0; probe < 40; ++probe) {
            const std::size_t j = pick2() % sys.size();
            const std::size_t k = pick2() % sys.size();
            CHECK(oracle.gradient_entry(block, y, j, k) ==
                  doctest::Approx(grad.at(j, k)).epsilon(1e-13));
        }
    }
}

TEST_CASE("gradient entries agree with the dense gradient on sparse blocks") {
    std::mt19937 gen(11);
    Density d = system_density(1);
    const DiscreteSystem sys = discretize(d, build_mesh(d, 10, MeshStyle::Equimass));
    const MmotOracle oracle(sys);
    const Marginal rho = sys.marginal();
    // One sparse block from an LP vertex, one dense.
    DenseMatrix w(sys.size(), sys.size());
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (double& x : w.v) x = dist(gen);
    const Plan vertex = transport_lp(w, rho, rho).plan;
    std::vector<Plan> y{vertex, random_feasible(gen, rho, rho)};
    for (std::size_t block = 0; block < 2; ++block) {
        const DenseMatrix grad = oracle.block_gradient(block, y);
        for (std::size_t j = 0; j < sys.size(); ++j) {
            for (std::size_t k = 0; k < sys.size(); ++k) {
                CHECK(oracle.gradient_entry(block, y, j, k) ==
                      doctest::Approx(grad.at(j, k)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("sce_potential") {
    CHECK_THROWS_AS(sce_potential({}), DomainError);

    // Single block: shifted copy.
    std::vector<std::vector<double>> one{{3.0, 1.0, 2.0}};
    const auto v1 = sce_potential(one);
    CHECK(v1[0] == doctest::Approx(2.0));
    CHECK(v1[1] == doctest::Approx(0.0));
    CHECK(v1[2] == doctest::Approx(1.0));

    // Constant duals collapse to zero.
    std::vector<std::vector<double>> flat{{0.7, 0.7}, {0.7, 0.7}};
    for (double x : sce_potential(flat)) CHECK(x == doctest::Approx(0.0));

    std::vector<std::vector<double>> two{{1.0, 3.0}, {3.0, 1.0}};
    const auto v2 = sce_potential(two);
    CHECK(v2[0] == doctest::Approx(0.0));
    CHECK(v2[1] == doctest::Approx(0.0));
}

TEST_CASE("ot_map") {
    Density d = system_density(1);
    const DiscreteSystem sys = discretize(d, build_mesh(d, 8, MeshStyle::Equimass));
    const Marginal rho = sys.marginal();

    // Identity coupling maps every source onto itself.
    SparseBuilder diag(sys.size(), sys.size());
    for (std::size_t j = 0; j < sys.size(); ++j) diag.push(j, j, sys.rho[j]);
    const Plan identity(MatrixStorage(diag.take()), rho, rho);
    const auto pts = ot_map(identity, sys);
    REQUIRE(pts.size() == sys.size());
    for (const MappedPoint& p : pts) {
        CHECK(p.img[0] == doctest::Approx(p.src[0]).epsilon(1e-14));
    }

    // Row mass concentrated on one column lands on that barycenter.
    SparseBuilder conc(sys.size(), sys.size());
    for (std::size_t j = 0; j < sys.size(); ++j) conc.push(j, (j + 3) % sys.size(), sys.rho[j]);
    const Plan shifted(MatrixStorage(conc.take()), rho, rho);
    const auto pts2 = ot_map(shifted, sys);
    for (const MappedPoint& p : pts2) {
        CHECK(p.img[0] == doctest::Approx(sys.bary[(p.source + 3) % sys.size()][0]).epsilon(1e-14));
    }
}

TEST_CASE("error_metrics") {
    std::vector<double> v{0.0, 1.0};
    std::vector<double> vs{0.0, 2.0};
    const ErrorMetrics same = error_metrics(5.0, 5.0, vs, vs);
    CHECK(same.err_obj == 0.0);
    CHECK(same.err_sce == 0.0);
    const ErrorMetrics doubled = error_metrics(10.0, 5.0, v, vs);
    CHECK(doubled.err_obj == doctest::Approx(1.0));
    CHECK(doubled.err_sce == doctest::Approx(0.5));
    CHECK_THROWS_AS(error_metrics(1.0, 0.0, v, vs), DomainError);
}

TEST_CASE("1-D oracle: uniform two-electron co-motion is the half shift") {
    const Density d = uniform_density(0.0, 1.0, 2);
    const Oracle1d oracle(d);
    for (double x : {0.05, 0.1, 0.2, 0.3, 0.45, 0.49}) {
        CHECK(oracle.comotion(2, x) == doctest::Approx(x + 0.5).epsilon(1e-9));
    }
    for (double x : {0.55, 0.6, 0.75, 0.9}) {
        CHECK(oracle.comotion(2, x) == doctest::Approx(x - 0.5).epsilon(1e-9));
    }
    // obj* = ∫_0^1 (ρ̃/N_e) / |f_2(x) − x| dx with ρ̃ ≡ 2: the gap is always
    // 1/2, the weight integrates to 1, so obj* = 2.
    CHECK(oracle.objective() == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("1-D oracle: co-motion maps preserve the measure") {
    Density d = system_density(2);
    const Oracle1d oracle(d);
    const double total = d.total_mass();
    const double scale = static_cast<double>(oracle.n_electrons()) / total;
    for (int s = 0; s < 1000; ++s) {
        const double x =
            d.lo[0] + (d.hi[0] - d.lo[0]) * (static_cast<double>(s) + 0.5) / 1000.0;
        const double fx = d.cdf(x) * scale;
        for (int e = 2; e <= oracle.n_electrons(); ++e) {
            const double fy = d.cdf(oracle.comotion(e, x)) * scale;
            double expect = std::fmod(fx + static_cast<double>(e - 1),
                                      static_cast<double>(oracle.n_electrons()));
            CHECK(std::fabs(fy - expect) <= 1e-6);
        }
    }
}

TEST_CASE("1-D oracle objective matches the exact two-marginal LP") {
    Density d = system_density(2);
    d.n_electrons = 2;
    const Oracle1d oracle(d, 2);
    const Mesh mesh = build_mesh(d, 40, MeshStyle::Equimass);
    const DiscreteSystem sys = discretize(d, mesh);
    REQUIRE(sys.size() == 40);
    const Marginal rho = sys.marginal();
    DenseMatrix w(40, 40);
    for (std::size_t j = 0; j < 40; ++j) {
        for (std::size_t k = 0; k < 40; ++k) {
            w.at(j, k) = sys.cost(j, k);
            if (j == k) w.at(j, k) += sys.beta / sys.rho[j];
        }
    }
    const double lp = transport_lp(w, rho, rho).value;
    CHECK(std::fabs(lp - oracle.objective()) / oracle.objective() <= 0.02);
}
