// Corner-embedding scene checks: closed-form norms against the SVD, the two
// relation checkers on constructed equality families and random
// falsification draws, scene structure, and the defect machinery.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cbsim/counterexample.hpp"
#include "cbsim/rng.hpp"

using namespace cbsim;

namespace {

Complex rand_c(std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    return Complex(nd(gen), nd(gen));
}

Complex rand_phase(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> ud(0.0, 2.0 * M_PI);
    return std::polar(1.0, ud(gen));
}

CMat ut2(Complex a, Complex b, Complex d) {
    CMat m(2, 2);
    m << a, b, Complex(0, 0), d;
    return m;
}

// Family with delta_p = 0: the two matrices differ by phases only.
UTParams phase_family(std::mt19937_64& gen) {
    UTParams p;
    p.alpha = rand_c(gen);
    p.beta = rand_c(gen);
    p.gamma = rand_c(gen);
    Complex ph = rand_phase(gen);
    p.alpha_p = p.alpha * rand_phase(gen);
    p.beta_p = p.beta * ph;
    p.gamma_p = p.gamma * ph;
    p.delta_p = 0.0;
    return p;
}

// Family with alpha_p = 0: delta_p absorbs part of gamma, beta_p solves
// conj(beta_p) gamma_p = conj(beta) gamma, and alpha restores the z1 row sum.
UTParams kernel_family(std::mt19937_64& gen) {
    UTParams p;
    p.beta = rand_c(gen);
    p.gamma = rand_c(gen) + Complex(1.0, 0);  // keep |gamma| away from zero
    std::uniform_real_distribution<double> ud(0.0, 0.9);
    p.delta_p = std::polar(ud(gen) * std::abs(p.gamma), std::arg(rand_c(gen)));
    double gp_mod = std::sqrt(std::norm(p.gamma) - std::norm(p.delta_p));
    p.gamma_p = std::polar(gp_mod, std::arg(rand_c(gen)));
    p.beta_p = std::conj(std::conj(p.beta) * p.gamma / p.gamma_p);
    p.alpha = std::sqrt(std::norm(p.beta_p) - std::norm(p.beta));
    p.alpha_p = 0.0;
    return p;
}

}  // namespace

TEST_CASE("closed-form upper-triangular norm") {
    CHECK(ut2_norm_closed_form(1, 0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ut2_norm_closed_form(1, 1, 0) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(ut2_norm_closed_form(1, 1, 1) ==
          doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-12));
    auto gen = substream(101, 0);
    for (int t = 0; t < 2000; ++t) {
        Complex a = rand_c(gen), b = rand_c(gen), d = rand_c(gen);
        CHECK(std::abs(ut2_norm_closed_form(a, b, d) - op_norm(ut2(a, b, d))) <= 1e-10);
    }
}

TEST_CASE("relation checker on the phase family") {
    auto gen = substream(102, 0);
    for (int t = 0; t < 200; ++t) {
        LemmaRelReport r = lemma_rel_check(phase_family(gen), 1e-8, 16);
        CHECK(r.hypothesis_holds);
        CHECK(r.eq_gamma_ok);
        CHECK(r.eq_alpha_ok);
        CHECK(r.ineq_betagamma_ok);
        CHECK(r.equality_implies_degenerate_ok);
    }
}

TEST_CASE("relation checker on the kernel-substitution family") {
    auto gen = substream(103, 0);
    for (int t = 0; t < 200; ++t) {
        LemmaRelReport r = lemma_rel_check(kernel_family(gen), 1e-8, 16);
        CHECK(r.hypothesis_holds);
        CHECK(r.eq_gamma_ok);
        CHECK(r.eq_alpha_ok);
        CHECK(r.ineq_betagamma_ok);
        CHECK(r.equality_implies_degenerate_ok);
    }
}

TEST_CASE("relation checker rejects mismatched gamma") {
    auto gen = substream(104, 0);
    int rejected = 0;
    for (int t = 0; t < 50; ++t) {
        UTParams p = phase_family(gen);
        p.gamma_p *= 2.0;  // breaks the |gamma| balance
        LemmaRelReport r = lemma_rel_check(p, 1e-8, 16);
        if (!r.hypothesis_holds) ++rejected;
        CHECK_FALSE(r.eq_gamma_ok);
    }
    CHECK(rejected == 50);
}

TEST_CASE("diagonal checker: no false positives on alpha_p delta_p != 0") {
    auto gen = substream(105, 0);
    for (int t = 0; t < 300; ++t) {
        UTParams p;
        p.alpha = rand_c(gen);
        p.beta = rand_c(gen);
        p.gamma = rand_c(gen);
        p.alpha_p = rand_c(gen) + Complex(0.5, 0);
        p.beta_p = rand_c(gen);
        p.gamma_p = rand_c(gen) + Complex(0.5, 0);
        p.delta_p = rand_c(gen) + Complex(0.5, 0);
        // Hypothesis can only hold when alpha_p delta_p = 0, so these random
        // draws must be rejected at the hypothesis stage.
        CHECK_FALSE(lemma_rel_check(p, 1e-8, 16).hypothesis_holds);
        CHECK(lemma_diag_check(p, 1e-8, 16));
    }
    UTParams bad;
    bad.gamma_p = 0.0;
    CHECK_THROWS_AS(lemma_diag_check(bad, 1e-8, 16), ValidationError);
}

TEST_CASE("diagonal checker accepts degenerate equality instances") {
    auto gen = substream(106, 0);
    for (int t = 0; t < 100; ++t) {
        UTParams p = kernel_family(gen);  // alpha_p = 0, hypothesis holds
        CHECK(lemma_diag_check(p, 1e-8, 16));
    }
}

TEST_CASE("scene structure") {
    CounterexampleScene scene = build_scene();
    CHECK(scene.A_R.dim() == 3);
    CHECK(scene.A_D.dim() == 3);
    CHECK(scene.A_R.is_unital_algebra());
    CHECK(scene.Psi.unital());
    CHECK(scene.Psi.multiplicative());

    CMat id4 = CMat::Identity(4, 4);
    CHECK((scene.Psi.apply(id4) - id4).norm() <= 1e-12);

    // s = [[0,1],[0,0]] maps to diag(0,1) in the corner.
    CMat a = CMat::Zero(4, 4);
    a(0, 3) = 1.0;
    CMat img = scene.Psi.apply(a);
    CMat expect = CMat::Zero(4, 4);
    expect(1, 3) = 1.0;
    CHECK((img - expect).norm() <= 1e-12);

    // Every nonscalar part is square-zero.
    for (int k = 1; k < 3; ++k) {
        const CMat& b = scene.A_R.basis()[static_cast<std::size_t>(k)];
        CHECK((b * b).norm() == 0.0);
        const CMat& c = scene.A_D.basis()[static_cast<std::size_t>(k)];
        CHECK((c * c).norm() == 0.0);
    }

    CbEstimate fwd = cb_norm_estimate(scene.Psi, 12, 9);
    CbEstimate bwd = cb_norm_estimate(scene.Psi.inverse_map(), 12, 9);
    CHECK(fwd.lower >= 1.0 - 1e-9);
    CHECK(bwd.lower >= 1.0 - 1e-9);
    CHECK(std::isfinite(fwd.lower));
    CHECK(std::isfinite(bwd.lower));
}

TEST_CASE("isometry defect") {
    CounterexampleScene scene = build_scene();
    CMat id = CMat::Identity(2, 2);
    SUBCASE("identity candidates see the row/diagonal gap") {
        double d = isometry_defect(scene, id, id, id, id, 16);
        CHECK(d >= std::sqrt(2.0) - 1.0 - 1e-9);
        // The sweep includes magnitude pair (2,2) where the gap doubles.
        CHECK(d == doctest::Approx(2.0 * (std::sqrt(2.0) - 1.0)).epsilon(1e-9));
    }
    SUBCASE("scalar left candidates rescale the row side") {
        double c = 0.8;
        double d = isometry_defect(scene, c * id, c * id, id, id, 16);
        CHECK(d >= std::abs(c * c * std::sqrt(2.0) - 1.0) - 1e-12);
    }
    SUBCASE("unimodular rescaling leaves the defect unchanged") {
        auto gen = substream(107, 0);
        CMat x1 = ut2(rand_c(gen) + Complex(2, 0), rand_c(gen), rand_c(gen) + Complex(2, 0));
        double base = isometry_defect(scene, x1, id, id, id, 12);
        double rot = isometry_defect(scene, rand_phase(gen) * x1, id, id, id, 12);
        CHECK(std::abs(base - rot) <= 1e-12);
    }
    SUBCASE("singular candidate rejected") {
        CHECK_THROWS_AS(isometry_defect(scene, ut2(1, 1, 0), id, id, id, 8),
                        SingularityError);
    }
}

TEST_CASE("defect minimization") {
    CounterexampleScene scene = build_scene();
    SUBCASE("deterministic and nonnegative") {
        DefectResult a = defect_minimize(scene, 4.0, 3, 55, 12);
        DefectResult b = defect_minimize(scene, 4.0, 3, 55, 12);
        CHECK(a.best_defect == b.best_defect);
        CHECK((a.X1 - b.X1).norm() == 0.0);
        CHECK(a.best_defect >= 0.0);
        CHECK(a.best_defect > 0.0);
        CHECK(condition(a.X1) <= 4.0 + 1e-9);
        CHECK(condition(a.Y2) <= 4.0 + 1e-9);
    }
    SUBCASE("budget monotonicity under nested seeds") {
        double prev = std::numeric_limits<double>::infinity();
        for (int budget : {1, 2, 4}) {
            double cur = defect_minimize(scene, 4.0, budget, 19, 10).best_defect;
            CHECK(cur <= prev + 1e-15);
            prev = cur;
        }
    }
}
