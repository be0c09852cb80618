// Similarity engine checks: the single step, the alternating iteration's
// monotone chain, zeta selection, the almost-isometric certificate, and the
// conjugation lower-bound / joint-similarity diagnostics.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cbsim/rng.hpp"
#include "cbsim/similarity.hpp"

using namespace cbsim;

namespace {

CMat unit(int n, int i, int j) {
    CMat m = CMat::Zero(n, n);
    m(i, j) = 1.0;
    return m;
}

CMat diag2(Complex a, Complex b) {
    CMat m = CMat::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

}  // namespace

TEST_CASE("paulsen_step on a completely contractive map stays near identity") {
    OperatorSubspace m2 = OperatorSubspace::full_matrix_algebra(2);
    auto gen = substream(1, 0);
    CMat u = random_unitary(2, gen);
    CBLinearMap conj = CBLinearMap::conjugation(m2, u);
    SimilarityStepResult r = paulsen_step(conj, 8, 21);
    CHECK(r.kappa <= 1.0 + 1e-6);
    CHECK(r.achieved_cb_bound <= 1.0 + 1e-6);
}

TEST_CASE("paulsen_step on conjugation by diag(1,2)") {
    OperatorSubspace m2 = OperatorSubspace::full_matrix_algebra(2);
    CMat t = diag2(1.0, 2.0);
    CBLinearMap conj = CBLinearMap::conjugation(m2, t);
    SimilarityStepResult r = paulsen_step(conj, 16, 5);
    CHECK(r.achieved_cb_bound <= 1.0 + 1e-6);
    CHECK(r.kappa <= 2.0 + 1e-3);
    CHECK(r.kappa == doctest::Approx(2.0).epsilon(2e-3));
    // Scaling convention: |X| = |X^{-1}|.
    CHECK(op_norm(r.X) == doctest::Approx(op_norm(inverse(r.X))).epsilon(1e-9));
}

TEST_CASE("paulsen_step determinism") {
    OperatorSubspace m2 = OperatorSubspace::full_matrix_algebra(2);
    auto gen = substream(9, 0);
    CMat t = random_gaussian_matrix(2, 2, gen) + 2.0 * CMat::Identity(2, 2);
    CBLinearMap conj = CBLinearMap::conjugation(m2, t);
    SimilarityStepResult a = paulsen_step(conj, 8, 77);
    SimilarityStepResult b = paulsen_step(conj, 8, 77);
    CHECK((a.X - b.X).norm() == 0.0);
    CHECK(a.kappa == b.kappa);
}

TEST_CASE("paulsen_step honors explicit norm cuts exactly") {
    OperatorSubspace m2 = OperatorSubspace::full_matrix_algebra(2);
    CMat t = diag2(1.0, 3.0);
    CBLinearMap conj = CBLinearMap::conjugation(m2, t);
    CMat probe = unit(2, 0, 1) + 0.3 * unit(2, 1, 1);
    PaulsenOptions opts;
    opts.cuts.push_back({conj.apply(probe), op_norm(probe)});
    SimilarityStepResult r = paulsen_step(conj, 12, 3, opts);
    CMat xinv = inverse(r.X);
    CHECK(op_norm(r.X * conj.apply(probe) * xinv) <= op_norm(probe) + 1e-10);
}

TEST_CASE("iterate_xy chain is weakly decreasing") {
    // A 3-dimensional unital algebra in M_4 (block scalar + strictly upper
    // 2x2 corner) and a basis-rescaling isomorphism on it.
    CMat id4 = CMat::Identity(4, 4);
    CMat n1 = unit(4, 0, 2) + unit(4, 1, 3);
    CMat n2 = unit(4, 0, 3);
    OperatorSubspace alg(4, {id4, n1, n2}, true);
    std::vector<CMat> images = {id4, 2.0 * n1 + 0.5 * n2, 0.7 * n2};
    CBLinearMap f(alg, alg, images, true, true);

    std::vector<BlockGrid> probes;
    probes.push_back({{n1}});
    probes.push_back({{id4 + n2}});
    probes.push_back({{n1, n2}, {CMat::Zero(4, 4), n1}});

    IterationTrace tr = iterate_xy(f, probes, 3, 8, 13);
    REQUIRE(tr.X_seq.size() == 3);
    REQUIRE(tr.Y_seq.size() == 3);
    for (const auto& chain : tr.chain) {
        REQUIRE(chain.size() == 7);  // initial value plus two per iteration
        for (std::size_t i = 0; i + 1 < chain.size(); ++i)
            CHECK(chain[i + 1] <= chain[i] + 1e-9);
    }
}

TEST_CASE("iterate_xy on a complete isometry keeps chains flat") {
    OperatorSubspace m2 = OperatorSubspace::full_matrix_algebra(2);
    auto gen = substream(4, 2);
    CMat u = random_unitary(2, gen);
    CBLinearMap conj = CBLinearMap::conjugation(m2, u);
    BlockGrid probe = {{unit(2, 0, 1) + 0.5 * CMat::Identity(2, 2)}};
    IterationTrace tr = iterate_xy(conj, {probe}, 2, 8, 19);
    double first = tr.chain[0].front();
    for (double v : tr.chain[0]) CHECK(std::abs(v - first) <= 1e-6);
}

TEST_CASE("iterate_xy monitor rows are weakly decreasing and Lipschitz") {
    CMat id4 = CMat::Identity(4, 4);
    CMat n1 = unit(4, 0, 2) + unit(4, 1, 3);
    CMat n2 = unit(4, 0, 3);
    OperatorSubspace alg(4, {id4, n1, n2}, true);
    CBLinearMap f(alg, alg, {id4, 1.5 * n1, 0.8 * n2}, true, true);

    IterateOptions io;
    MonitoredElement m;
    m.a = n1 + 0.2 * n2;
    m.lambdas = {Complex(0, 0), Complex(0.5, 0), Complex(0.25, 0),
                 Complex(0, 0.5), Complex(-0.3, 0.1)};
    io.monitors.push_back(m);
    IterationTrace tr = iterate_xy(f, {}, 2, 8, 23, io);
    REQUIRE(tr.f_rows.size() == 1);
    REQUIRE(tr.f_rows[0].size() == 3);
    for (std::size_t l = 0; l < m.lambdas.size(); ++l)
        for (std::size_t n = 0; n + 1 < tr.f_rows[0].size(); ++n)
            CHECK(tr.f_rows[0][n + 1][l] <= tr.f_rows[0][n][l] + 1e-9);
    // |f_n(l1) - f_n(l2)| <= |l1 - l2| for conjugation-invariant offsets.
    for (const auto& row : tr.f_rows[0])
        for (std::size_t i = 0; i < m.lambdas.size(); ++i)
            for (std::size_t j = 0; j < m.lambdas.size(); ++j)
                CHECK(std::abs(row[i] - row[j]) <=
                      std::abs(m.lambdas[i] - m.lambdas[j]) + 1e-9);
}

TEST_CASE("select_zeta") {
    CMat nil = unit(2, 0, 1);
    CHECK(select_zeta(nil, 0.3) == Complex(1.0, 0.0));
    CHECK(spectral_radius(nil + 0.3 * CMat::Identity(2, 2)) >= 0.3 - 1e-10);

    CMat a = diag2(0.5, -0.2);
    Complex z = select_zeta(a, 0.1);
    CHECK(std::abs(z - Complex(1.0, 0.0)) <= 1e-12);
    CHECK(spectral_radius(a + 0.1 * z * CMat::Identity(2, 2)) ==
          doctest::Approx(0.6).epsilon(1e-12));

    CMat b = diag2(-0.5, 0.1);
    Complex zb = select_zeta(b, 0.2);
    CHECK(std::abs(zb - Complex(-1.0, 0.0)) <= 1e-12);
    CHECK(spectral_radius(b + 0.2 * zb * CMat::Identity(2, 2)) ==
          doctest::Approx(0.7).epsilon(1e-12));

    auto gen = substream(31, 0);
    for (int t = 0; t < 20; ++t) {
        CMat m = random_gaussian_matrix(3, 3, gen);
        for (double delta : {0.05, 0.3, 0.9}) {
            Complex zz = select_zeta(m, delta);
            CHECK(std::abs(std::abs(zz) - 1.0) <= 1e-12);
            CHECK(spectral_radius(m + delta * zz * CMat::Identity(3, 3)) >=
                  delta - 1e-10);
        }
    }
}

TEST_CASE("almost_isometric on a complete isometry") {
    OperatorSubspace m2 = OperatorSubspace::full_matrix_algebra(2);
    auto gen = substream(2, 8);
    CMat u = random_unitary(2, gen);
    CBLinearMap conj = CBLinearMap::conjugation(m2, u);
    std::vector<CMat> a0 = {unit(2, 0, 1), diag2(1.0, 0.3)};
    AlmostIsometricOptions opts;
    opts.grid_radii = 9;  // coarse grid keeps this unit test fast
    opts.grid_angles = 9;
    AlmostIsometryReport rep = almost_isometric(conj, a0, 0.1, 6, 37, opts);
    CHECK(rep.sigma < 1.0 + rep.epsilon);
    CMat xinv = inverse(rep.X), yinv = inverse(rep.Y);
    for (std::size_t e = 0; e < a0.size(); ++e) {
        double lhs = op_norm(rep.X * a0[e] * xinv);
        double rhs = op_norm(rep.Y * conj.apply(a0[e]) * yinv);
        CHECK(lhs <= rep.bound_factor * rhs + 1e-9);
        CHECK(rep.measured_ratios[e] <= 1.0 + 1e-6);
    }
}

TEST_CASE("almost_isometric second branch on invertible diagonal elements") {
    // Diagonal algebra isomorphism; A0 holds invertible (nonzero spectrum)
    // elements, so the delta = 0 branch applies with sigma = 1.
    CMat e1 = unit(2, 0, 0), e2 = unit(2, 1, 1);
    OperatorSubspace diag(2, {e1 + e2, e1}, true);
    CBLinearMap f(diag, diag, {e1 + e2, e2}, true, true);  // swaps the entries
    std::vector<CMat> a0 = {diag2(1.0, 0.5), diag2(0.4, -0.8)};
    AlmostIsometricOptions opts;
    opts.grid_radii = 9;
    opts.grid_angles = 9;
    AlmostIsometryReport rep = almost_isometric(f, a0, 0.25, 6, 41, opts);
    CHECK_FALSE(rep.quasinilpotent_branch);
    CHECK(rep.delta == 0.0);
    CHECK(rep.sigma == 1.0);
    // rho is the infimum of spectral radii: min(r(diag(1, .5)), r(diag(.4, -.8))).
    CHECK(rep.rho == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(rep.bound_factor == doctest::Approx(1.0 + 0.25 / 0.8).epsilon(1e-12));
    CMat xinv = inverse(rep.X), yinv = inverse(rep.Y);
    for (std::size_t e = 0; e < a0.size(); ++e)
        CHECK(op_norm(rep.X * a0[e] * xinv) <=
              rep.bound_factor * op_norm(rep.Y * f.apply(a0[e]) * yinv) + 1e-9);
}

TEST_CASE("clbp_defect") {
    SUBCASE("unitary X gives ratio one") {
        auto gen = substream(6, 1);
        CMat u = random_unitary(3, gen);
        ClbpResult r = clbp_defect(u, OperatorSubspace::full_matrix_algebra(3), 8, 2);
        CHECK(r.ratio == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("full matrix algebra recovers the condition number") {
        CMat x = diag2(1.0, 3.0);
        ClbpResult r = clbp_defect(x, OperatorSubspace::full_matrix_algebra(2), 64, 3);
        CHECK(r.kappa == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(r.cb_est == doctest::Approx(3.0).epsilon(1e-4));
        CHECK(r.ratio == doctest::Approx(1.0).epsilon(1e-4));
        // Rank-one oracle: a = e2 e1^* attains |X e2| |X^{-*} e1| = 3.
        CMat a = unit(2, 1, 0);
        CHECK(op_norm(x * a * inverse(x)) == doctest::Approx(3.0).epsilon(1e-12));
    }
    SUBCASE("scalar algebra sees nothing") {
        CMat x = diag2(1.0, 3.0);
        ClbpResult r = clbp_defect(x, OperatorSubspace::scalar_algebra(2), 8, 4);
        CHECK(r.cb_est == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(r.ratio == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    }
    SUBCASE("singular X rejected") {
        CHECK_THROWS_AS(
            clbp_defect(diag2(1.0, 0.0), OperatorSubspace::full_matrix_algebra(2), 4, 5),
            SingularityError);
    }
}

TEST_CASE("verify_joint_similarity") {
    OperatorSubspace m2 = OperatorSubspace::full_matrix_algebra(2);
    SUBCASE("identity representation with Z = I") {
        CBLinearMap theta(m2, m2, m2.basis(), true, true);
        JointSimilarityResult r =
            verify_joint_similarity(CMat::Identity(2, 2), theta, 8, 6);
        CHECK(r.forward_ok);
        CHECK(r.adjoint_ok);
        CHECK(r.norm_recovered);
        CHECK(r.max_norm_gap <= 1e-9);
    }
    SUBCASE("unitary conjugation of a star representation") {
        auto gen = substream(8, 3);
        CMat u = random_unitary(2, gen);
        CBLinearMap theta = CBLinearMap::conjugation(m2, u);
        CMat z = random_unitary(2, gen);
        JointSimilarityResult r = verify_joint_similarity(z, theta, 8, 7);
        CHECK(r.forward_ok);
        CHECK(r.adjoint_ok);
        CHECK(r.norm_recovered);
    }
    SUBCASE("skew conjugation fails the adjoint direction") {
        CMat t = diag2(1.0, 2.0);
        CBLinearMap theta = CBLinearMap::conjugation(m2, t);
        JointSimilarityResult r =
            verify_joint_similarity(CMat::Identity(2, 2), theta, 8, 8);
        CHECK_FALSE(r.forward_ok);
        CHECK_FALSE(r.norm_recovered);
    }
}
