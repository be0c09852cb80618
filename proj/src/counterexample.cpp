#include "cbsim/counterexample.hpp"

#include <algorithm>
#include <cmath>

#include "cbsim/rng.hpp"

namespace cbsim {

namespace {

// |[[a, b], [0, d]]|^2 = (S + sqrt(S^2 - 4 |a d|^2)) / 2 with
// S = |a|^2 + |b|^2 + |d|^2.
double ut2_norm_sq(Complex a, Complex b, Complex d) {
    double s = std::norm(a) + std::norm(b) + std::norm(d);
    double det2 = std::norm(a) * std::norm(d);
    double disc = std::max(0.0, s * s - 4.0 * det2);
    return 0.5 * (s + std::sqrt(disc));
}

// Left side of the comparison: [[alpha z1, beta z1 + gamma z2], [0, 0]].
double lhs_norm(const UTParams& p, Complex z1, Complex z2) {
    return ut2_norm_closed_form(p.alpha * z1, p.beta * z1 + p.gamma * z2, 0.0);
}

// Right side: [[alpha_p z1, beta_p z1 + gamma_p z2], [0, delta_p z2]].
double rhs_norm(const UTParams& p, Complex z1, Complex z2) {
    return ut2_norm_closed_form(p.alpha_p * z1, p.beta_p * z1 + p.gamma_p * z2,
                                p.delta_p * z2);
}

double params_scale(const UTParams& p) {
    double m = 0.0;
    for (Complex c : {p.alpha, p.beta, p.gamma, p.alpha_p, p.beta_p, p.gamma_p, p.delta_p})
        m = std::max(m, std::abs(c));
    return 1.0 + m * m;
}

// Worst deviation of |lhs| from |rhs| over phase pairs at several
// magnitude ratios, including the two axis points.
double hypothesis_gap(const UTParams& p, int grid_density) {
    double gap = std::max(std::abs(lhs_norm(p, 1.0, 0.0) - rhs_norm(p, 1.0, 0.0)),
                          std::abs(lhs_norm(p, 0.0, 1.0) - rhs_norm(p, 0.0, 1.0)));
    for (double m1 : {0.5, 1.0, 2.0})
        for (int i = 0; i < grid_density; ++i)
            for (int j = 0; j < grid_density; ++j) {
                Complex z1 = std::polar(m1, 2.0 * M_PI * i / grid_density);
                Complex z2 = std::polar(1.0, 2.0 * M_PI * j / grid_density);
                gap = std::max(gap, std::abs(lhs_norm(p, z1, z2) - rhs_norm(p, z1, z2)));
            }
    return gap;
}

CMat block4(Complex lambda, const CMat& s) {
    CMat m = lambda * CMat::Identity(4, 4);
    m.block(0, 2, 2, 2) += s;
    return m;
}

CMat row2(Complex z1, Complex z2) {
    CMat s = CMat::Zero(2, 2);
    s(0, 0) = z1;
    s(0, 1) = z2;
    return s;
}

CMat diag2m(Complex z1, Complex z2) {
    CMat s = CMat::Zero(2, 2);
    s(0, 0) = z1;
    s(1, 1) = z2;
    return s;
}

// Six real parameters of an upper-triangular 2x2 complex matrix.
CMat ut_from_params(const double* q) {
    CMat m(2, 2);
    m << Complex(q[0], q[1]), Complex(q[2], q[3]), Complex(0, 0), Complex(q[4], q[5]);
    return m;
}

void ut_to_params(const CMat& m, double* q) {
    q[0] = m(0, 0).real();
    q[1] = m(0, 0).imag();
    q[2] = m(0, 1).real();
    q[3] = m(0, 1).imag();
    q[4] = m(1, 1).real();
    q[5] = m(1, 1).imag();
}

// Closed-form operator norm of a general 2x2 matrix.
double norm2x2(const CMat& m) {
    double s = m.squaredNorm();
    double det2 = std::norm(m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0));
    double disc = std::max(0.0, s * s - 4.0 * det2);
    return std::sqrt(0.5 * (s + std::sqrt(disc)));
}

double ut_condition(const CMat& m) {
    // Never throws: returns +inf for singular candidates so the optimizer
    // simply rejects them.
    Eigen::JacobiSVD<CMat> svd(m);
    double smin = svd.singularValues()(1);
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return svd.singularValues()(0) / smin;
}

}  // namespace

double ut2_norm_closed_form(Complex a11, Complex a12, Complex a22) {
    return std::sqrt(ut2_norm_sq(a11, a12, a22));
}

LemmaRelReport lemma_rel_check(const UTParams& p, double tol, int grid_density) {
    if (grid_density < 8)
        throw ValidationError("grid_density must be at least 8", "grid_density");
    double scale = params_scale(p);
    LemmaRelReport r;
    r.hypothesis_holds = hypothesis_gap(p, grid_density) <= tol * scale;

    double ga = std::norm(p.gamma), gp = std::norm(p.gamma_p), dp = std::norm(p.delta_p);
    r.eq_gamma_ok = std::abs(ga - gp - dp) <= tol * scale;
    double al = std::norm(p.alpha) + std::norm(p.beta);
    double ar = std::norm(p.alpha_p) + std::norm(p.beta_p);
    r.eq_alpha_ok = std::abs(al - ar) <= tol * scale;
    double bg = std::abs(p.beta) * std::abs(p.gamma);
    double bg_p = std::abs(p.beta_p) * std::abs(p.gamma_p);
    r.ineq_betagamma_ok = bg <= bg_p + tol * scale;
    bool equality = std::abs(bg - bg_p) <= tol * scale;
    r.equality_implies_degenerate_ok =
        !equality || std::abs(p.alpha_p * p.delta_p) <= tol * scale;
    return r;
}

bool lemma_diag_check(const UTParams& p, double tol, int grid_density) {
    if (std::abs(p.gamma_p) <= tol)
        throw ValidationError("gamma_p must be nonzero", "gamma_p");
    if (grid_density < 8)
        throw ValidationError("grid_density must be at least 8", "grid_density");
    double scale = params_scale(p);
    if (hypothesis_gap(p, grid_density) > tol * scale) return true;  // vacuous
    return std::abs(p.alpha_p * p.delta_p) <= tol * scale;
}

CounterexampleScene build_scene() {
    CMat id4 = CMat::Identity(4, 4);
    // Corner embeddings: row space entries land at (0,2), (0,3); diagonal
    // space entries at (0,2), (1,3).
    CMat r1 = block4(0.0, row2(1.0, 0.0));
    CMat r2 = block4(0.0, row2(0.0, 1.0));
    CMat d1 = block4(0.0, diag2m(1.0, 0.0));
    CMat d2 = block4(0.0, diag2m(0.0, 1.0));
    OperatorSubspace a_r(4, {id4, r1, r2}, true);
    OperatorSubspace a_d(4, {id4, d1, d2}, true);
    CBLinearMap psi(a_r, a_d, {id4, d1, d2}, /*unital=*/true, /*multiplicative=*/true);
    return CounterexampleScene{std::move(a_r), std::move(a_d), std::move(psi),
                               CMat::Identity(2, 2), CMat::Identity(2, 2),
                               CMat::Identity(2, 2), CMat::Identity(2, 2)};
}

double isometry_defect(const CounterexampleScene&, const CMat& x1, const CMat& x2,
                       const CMat& y1, const CMat& y2, int grid_density) {
    for (const CMat* m : {&x1, &x2, &y1, &y2}) (void)condition(*m);  // singularity guard
    double defect = 0.0;
    for (double m1 : {0.5, 1.0, 2.0})
        for (double m2 : {0.5, 1.0, 2.0})
            for (int i = 0; i < grid_density; ++i)
                for (int j = 0; j < grid_density; ++j) {
                    Complex z1 = std::polar(m1, 2.0 * M_PI * i / grid_density);
                    Complex z2 = std::polar(m2, 2.0 * M_PI * j / grid_density);
                    CMat l = x1 * row2(z1, z2) * x2;
                    CMat r = y1 * diag2m(z1, z2) * y2;
                    defect = std::max(defect, std::abs(norm2x2(l) - norm2x2(r)));
                }
    return defect;
}

DefectResult defect_minimize(const CounterexampleScene& scene, double kappa_cap,
                             int budget, std::uint64_t seed, int grid_density) {
    if (kappa_cap < 1.0) throw ValidationError("kappa_cap must be >= 1", "kappa_cap");
    if (budget < 1) throw ValidationError("budget must be >= 1", "budget");

    // For upper-triangular candidates both norms reduce to the closed form:
    // X1 s X2 has entries (a11 b11 z1, a11 b12 z1 + a11 b22 z2, 0) and
    // Y1 psi(s) Y2 has (c11 d11 z1, c11 d12 z1 + c12 d22 z2, c22 d22 z2).
    auto eval = [&](const double* q) {
        CMat c[4];
        for (int m = 0; m < 4; ++m) {
            c[m] = ut_from_params(q + 6 * m);
            if (ut_condition(c[m]) > kappa_cap) return std::numeric_limits<double>::infinity();
        }
        UTParams p;
        p.alpha = c[0](0, 0) * c[1](0, 0);
        p.beta = c[0](0, 0) * c[1](0, 1);
        p.gamma = c[0](0, 0) * c[1](1, 1);
        p.alpha_p = c[2](0, 0) * c[3](0, 0);
        p.beta_p = c[2](0, 0) * c[3](0, 1);
        p.gamma_p = c[2](0, 1) * c[3](1, 1);
        p.delta_p = c[2](1, 1) * c[3](1, 1);
        double defect = 0.0;
        for (double m1 : {0.5, 1.0, 2.0})
            for (double m2 : {0.5, 1.0, 2.0})
                for (int i = 0; i < grid_density; ++i)
                    for (int j = 0; j < grid_density; ++j) {
                        Complex z1 = std::polar(m1, 2.0 * M_PI * i / grid_density);
                        Complex z2 = std::polar(m2, 2.0 * M_PI * j / grid_density);
                        defect = std::max(defect,
                                          std::abs(lhs_norm(p, z1, z2) - rhs_norm(p, z1, z2)));
                    }
        return defect;
    };

    DefectResult best;
    best.best_defect = std::numeric_limits<double>::infinity();
    for (int r = 0; r < budget; ++r) {
        double q[24];
        if (r == 0) {
            for (int m = 0; m < 4; ++m) ut_to_params(CMat::Identity(2, 2), q + 6 * m);
        } else {
            auto gen = substream(seed, static_cast<std::uint64_t>(r));
            for (int m = 0; m < 4; ++m) {
                CMat g = random_gaussian_matrix(2, 2, gen);
                g(1, 0) = 0.0;
                // Blend toward the identity until the condition cap holds.
                double t = 1.0;
                CMat c = g;
                for (int it = 0; it < 40 && ut_condition(c) > 0.9 * kappa_cap; ++it) {
                    t *= 0.7;
                    c = (1.0 - t) * CMat::Identity(2, 2) + t * g;
                }
                ut_to_params(c, q + 6 * m);
            }
        }
        double cur = eval(q);
        if (!std::isfinite(cur)) continue;

        // Compass search over the 24 real coordinates.
        double step = 0.25;
        for (int sweep = 0; sweep < 200 && step > 1e-6; ++sweep) {
            bool moved = false;
            for (int i = 0; i < 24; ++i)
                for (double dir : {+1.0, -1.0}) {
                    double saved = q[i];
                    q[i] = saved + dir * step;
                    double trial = eval(q);
                    if (trial < cur - 1e-14) {
                        cur = trial;
                        moved = true;
                    } else {
                        q[i] = saved;
                    }
                }
            if (!moved) step *= 0.5;
        }
        if (cur < best.best_defect) {
            best.best_defect = cur;
            best.X1 = ut_from_params(q);
            best.X2 = ut_from_params(q + 6);
            best.Y1 = ut_from_params(q + 12);
            best.Y2 = ut_from_params(q + 18);
        }
    }
    return best;
}

}  // namespace cbsim
