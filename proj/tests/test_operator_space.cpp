// Subspace/algebra representation and cb-norm estimation checks, including
// independent oracles: a dense rank-one grid for conjugation maps and an
// exhaustive lattice for the row-to-diagonal map.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cbsim/operator_space.hpp"
#include "cbsim/rng.hpp"

using namespace cbsim;

namespace {

CMat unit(int n, int i, int j) {
    CMat m = CMat::Zero(n, n);
    m(i, j) = 1.0;
    return m;
}

// Basis {I, E_12} of the span of the identity and the corner unit in M_2.
OperatorSubspace corner_space() {
    return OperatorSubspace(2, {CMat::Identity(2, 2), unit(2, 0, 1)}, false);
}

// Row space R = {[[z1, z2],[0, 0]]} and diagonal space D = {diag(z1, z2)}.
OperatorSubspace row_space() {
    return OperatorSubspace(2, {unit(2, 0, 0), unit(2, 0, 1)}, false);
}
OperatorSubspace diag_space() {
    return OperatorSubspace(2, {unit(2, 0, 0), unit(2, 1, 1)}, false);
}

CBLinearMap identity_map(const OperatorSubspace& s) {
    return CBLinearMap(s, s, s.basis());
}

}  // namespace

TEST_CASE("coordinates round trip and span rejection") {
    OperatorSubspace s = corner_space();
    CVec c = s.coordinates(CMat::Identity(2, 2));
    CHECK(std::abs(c(0) - 1.0) <= 1e-12);
    CHECK(std::abs(c(1)) <= 1e-12);
    CMat m = 3.0 * CMat::Identity(2, 2) + Complex(0, 2) * unit(2, 0, 1);
    c = s.coordinates(m);
    CHECK(std::abs(c(0) - 3.0) <= 1e-12);
    CHECK(std::abs(c(1) - Complex(0, 2)) <= 1e-12);
    CHECK((s.from_coordinates(c) - m).norm() <= 1e-12);
    CHECK_THROWS_AS(s.coordinates(unit(2, 1, 0)), NotInSpanError);
}

TEST_CASE("subspace validation") {
    CHECK_THROWS_AS(OperatorSubspace(2, {unit(2, 0, 1), unit(2, 0, 1)}, false),
                    ValidationError);
    // Nilpotent span is not a unital algebra.
    CHECK_THROWS_AS(OperatorSubspace(2, {unit(2, 0, 1)}, true), ValidationError);
    // Upper-triangular algebra passes both closure checks.
    OperatorSubspace ut(
        2, {CMat::Identity(2, 2), unit(2, 0, 1), unit(2, 0, 0)}, true);
    CHECK(ut.is_unital_algebra());
}

TEST_CASE("map validation flags") {
    OperatorSubspace m2 = OperatorSubspace::full_matrix_algebra(2);
    CHECK_THROWS_AS(CBLinearMap(m2, m2,
                                {unit(2, 0, 0), unit(2, 0, 1), unit(2, 1, 0)}),
                    ValidationError);
    // a -> 2a is linear but not unital.
    std::vector<CMat> doubled;
    for (const CMat& b : m2.basis()) doubled.push_back(2.0 * b);
    CHECK_THROWS_AS(CBLinearMap(m2, m2, doubled, /*unital=*/true), ValidationError);
    CMat t = CMat::Zero(2, 2);
    t(0, 0) = 1;
    t(1, 1) = 2;
    CBLinearMap conj = CBLinearMap::conjugation(m2, t);
    CHECK(conj.unital());
    CHECK(conj.multiplicative());
    CBLinearMap inv = conj.inverse_map();
    CMat a = unit(2, 0, 1);
    CHECK((inv.apply(conj.apply(a)) - a).norm() <= 1e-10);
}

TEST_CASE("apply_map_level and level_norm") {
    OperatorSubspace r = row_space(), d = diag_space();
    CBLinearMap psi(r, d, {unit(2, 0, 0), unit(2, 1, 1)});
    CMat s = unit(2, 0, 0) + 2.0 * unit(2, 0, 1);
    BlockGrid out = apply_map_level(psi, {{s}});
    CMat expect = CMat::Zero(2, 2);
    expect(0, 0) = 1;
    expect(1, 1) = 2;
    CHECK((out[0][0] - expect).norm() <= 1e-12);
    CHECK(level_norm(r, {{s}}) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
    CMat e12 = unit(2, 0, 1);
    CHECK(level_norm(r, {{e12, e12}, {e12, e12}}) ==
          doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(level_norm(r, {{unit(2, 1, 0)}}), NotInSpanError);
}

TEST_CASE("cb estimate: identity map is an isometry") {
    CbEstimate e = cb_norm_estimate(identity_map(OperatorSubspace::full_matrix_algebra(2)),
                                    8, 1);
    CHECK(e.level_used == 2);
    CHECK(e.lower == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(e.witness.ratio() - e.lower) <= 1e-9);
}

TEST_CASE("cb estimate: conjugation by diag(1,2) reaches the condition number") {
    CMat t = CMat::Zero(2, 2);
    t(0, 0) = 1;
    t(1, 1) = 2;
    CBLinearMap conj =
        CBLinearMap::conjugation(OperatorSubspace::full_matrix_algebra(2), t);
    CbEstimate e = cb_norm_estimate(conj, 16, 7);

    // Oracle: rank-one inputs a = u v^* over a dense phaseless grid; the
    // ratio |T u| |T^{-*} v| / (|u| |v|) is maximized near u = e2, v = e1.
    double oracle = 0.0;
    CMat tinv_adj = inverse(t).adjoint();
    const int g = 200;
    for (int i = 0; i <= g; ++i) {
        double th = M_PI * i / (2.0 * g);
        CVec u(2), v(2);
        u << std::cos(th), std::sin(th);
        for (int j = 0; j <= g; ++j) {
            double ph = M_PI * j / (2.0 * g);
            v << std::cos(ph), std::sin(ph);
            oracle = std::max(oracle, (t * u).norm() * (tinv_adj * v).norm());
        }
    }
    CHECK(oracle == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(e.lower == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(e.lower <= 2.0 + 1e-9);
}

TEST_CASE("cb estimate: row-to-diagonal inverse costs sqrt(2)") {
    OperatorSubspace r = row_space(), d = diag_space();
    CBLinearMap psi_inv(d, r, {unit(2, 0, 0), unit(2, 0, 1)});
    CbEstimate e = cb_norm_estimate(psi_inv, 24, 3);

    // Oracle: brute-force lattice over 2x2 coefficient grids of diagonal
    // inputs diag(z1, z2) with entries on a coarse complex lattice.
    double oracle = 0.0;
    std::vector<Complex> lattice;
    for (double re : {-1.0, 0.0, 1.0})
        for (double im : {-1.0, 0.0, 1.0}) lattice.push_back(Complex(re, im));
    for (const Complex& a : lattice)
        for (const Complex& b : lattice)
            for (const Complex& c : lattice)
                for (const Complex& e4 : lattice) {
                    CMat c1(2, 2), c2(2, 2);
                    c1 << a, b, c, e4;
                    c2 << b, a, e4, c;  // paired pattern covering swap symmetry
                    CMat in = coeff_block({c1, c2}, d.basis(), 2);
                    double nin = op_norm(in);
                    if (nin < 1e-9) continue;
                    CMat out = coeff_block({c1, c2}, r.basis(), 2);
                    oracle = std::max(oracle, op_norm(out) / nin);
                }
    CHECK(oracle >= std::sqrt(2.0) - 1e-9);
    CHECK(e.lower == doctest::Approx(std::sqrt(2.0)).epsilon(1e-4));
}

TEST_CASE("cb estimate: forward row-to-diagonal map is completely contractive") {
    OperatorSubspace r = row_space(), d = diag_space();
    CBLinearMap psi(r, d, {unit(2, 0, 0), unit(2, 1, 1)});
    ContractivityReport rep = is_completely_contractive(psi, 1e-6, 16, 5);
    CHECK(rep.verdict);
    CHECK(rep.worst_ratio == doctest::Approx(1.0).epsilon(1e-6));

    // Oracle: phase lattice at level 1, where the sup ratio 1 is attained.
    double best = 0.0;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
            Complex z1 = std::polar(1.0, 2 * M_PI * i / 16.0);
            Complex z2 = std::polar(1.0, 2 * M_PI * j / 16.0);
            CMat s = CMat::Zero(2, 2);
            s(0, 0) = z1;
            s(0, 1) = z2;
            best = std::max(best, op_norm(psi.apply(s)) / op_norm(s));
        }
    CHECK(best == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("cb estimate properties") {
    auto gen = substream(17, 0);
    SUBCASE("dilation by 2 detected") {
        OperatorSubspace m2 = OperatorSubspace::full_matrix_algebra(2);
        std::vector<CMat> doubled;
        for (const CMat& b : m2.basis()) doubled.push_back(2.0 * b);
        ContractivityReport rep =
            is_completely_contractive(CBLinearMap(m2, m2, doubled), 1e-6, 8, 2);
        CHECK_FALSE(rep.verdict);
        CHECK(rep.worst_ratio == doctest::Approx(2.0).epsilon(1e-9));
    }
    SUBCASE("budget monotonicity at fixed seed") {
        CMat t = random_gaussian_matrix(3, 3, gen) + 2.0 * CMat::Identity(3, 3);
        CBLinearMap conj =
            CBLinearMap::conjugation(OperatorSubspace::full_matrix_algebra(3), t);
        double prev = 0.0;
        for (int budget : {2, 4, 8, 16}) {
            double cur = cb_norm_estimate(conj, budget, 42).lower;
            CHECK(cur >= prev - 1e-12);
            prev = cur;
        }
        CHECK(prev == doctest::Approx(condition(t)).epsilon(1e-4));
    }
    SUBCASE("unitary basis conjugation invariance") {
        CMat t = CMat::Zero(2, 2);
        t(0, 0) = 1;
        t(1, 1) = 1.7;
        OperatorSubspace m2 = OperatorSubspace::full_matrix_algebra(2);
        CBLinearMap conj = CBLinearMap::conjugation(m2, t);
        double base = cb_norm_estimate(conj, 12, 9).lower;
        CMat u = random_unitary(2, gen);
        std::vector<CMat> rotated;
        for (const CMat& b : m2.basis()) rotated.push_back(u * b * u.adjoint());
        OperatorSubspace m2u(2, rotated, false);
        std::vector<CMat> images;
        for (const CMat& b : rotated) images.push_back(t * b * inverse(t));
        double rot = cb_norm_estimate(CBLinearMap(m2u, m2u, images), 12, 9).lower;
        CHECK(std::abs(base - rot) <= 1e-6 + 1e-4);
    }
    SUBCASE("determinism: identical seed, identical estimate") {
        CMat t = random_gaussian_matrix(2, 2, gen) + 2.0 * CMat::Identity(2, 2);
        CBLinearMap conj =
            CBLinearMap::conjugation(OperatorSubspace::full_matrix_algebra(2), t);
        CbEstimate a = cb_norm_estimate(conj, 6, 1234);
        CbEstimate b = cb_norm_estimate(conj, 6, 1234);
        CHECK(a.lower == b.lower);
    }
}

TEST_CASE("unital maps estimate at least one") {
    OperatorSubspace ut(
        2, {CMat::Identity(2, 2), unit(2, 0, 1)}, true);
    std::vector<CMat> images = {CMat::Identity(2, 2), 0.5 * unit(2, 0, 1)};
    CBLinearMap f(ut, ut, images, /*unital=*/true);
    CHECK(cb_norm_estimate(f, 8, 11).lower >= 1.0 - 1e-9);
}
