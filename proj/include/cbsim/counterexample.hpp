// The 4x4 corner-embedding scene: the row space R and diagonal space D in
// M_2, the unital algebras A_R, A_D they generate inside M_4, the algebra
// isomorphism between them, closed-form 2x2 upper-triangular norms, the two
// relation checkers behind the impossibility argument, and a seeded defect
// optimizer quantifying how far candidate similarities stay from isometry.

#pragma once

#include <cstdint>

#include "cbsim/operator_space.hpp"

namespace cbsim {

// Operator norm of [[a11, a12], [0, a22]] in closed form.
double ut2_norm_closed_form(Complex a11, Complex a12, Complex a22);

// Parameters of the two comparison matrices
//   [[alpha z1, beta z1 + gamma z2], [0, 0]]  and
//   [[alpha_p z1, beta_p z1 + gamma_p z2], [0, delta_p z2]].
struct UTParams {
    Complex alpha, beta, gamma;
    Complex alpha_p, beta_p, gamma_p, delta_p;
};

struct LemmaRelReport {
    bool hypothesis_holds = false;  // norm equality on the sample grid
    bool eq_gamma_ok = false;       // |gamma|^2 = |gamma_p|^2 + |delta_p|^2
    bool eq_alpha_ok = false;       // |alpha|^2 + |beta|^2 = |alpha_p|^2 + |beta_p|^2
    bool ineq_betagamma_ok = false; // |beta||gamma| <= |beta_p||gamma_p|
    bool equality_implies_degenerate_ok = false;  // equality above forces alpha_p delta_p = 0
};

// Tests the norm-equality hypothesis on a (z1, z2) sample grid and reports
// whether the three derived relations hold within tol.  The relation fields
// are computed unconditionally; they are only guaranteed when the
// hypothesis holds.
LemmaRelReport lemma_rel_check(const UTParams& p, double tol, int grid_density);

// With gamma_p != 0: returns true unless the hypothesis holds on the grid
// while alpha_p delta_p stays away from zero (which the argument excludes).
bool lemma_diag_check(const UTParams& p, double tol, int grid_density);

struct CounterexampleScene {
    OperatorSubspace A_R;  // {lambda I_4 + corner embedding of R}
    OperatorSubspace A_D;  // {lambda I_4 + corner embedding of D}
    CBLinearMap Psi;       // unital multiplicative isomorphism A_R -> A_D
    CMat X1, X2, Y1, Y2;   // default similarity candidates (identity)
};

CounterexampleScene build_scene();

// Max over the (z1, z2) sample grid (equispaced phases, magnitudes swept
// over {1/2, 1, 2}) of | |X1 s X2| - |Y1 psi(s) Y2| | for s = [[z1, z2], [0, 0]].
double isometry_defect(const CounterexampleScene& scene, const CMat& x1, const CMat& x2,
                       const CMat& y1, const CMat& y2, int grid_density);

struct DefectResult {
    double best_defect = 0.0;
    CMat X1, X2, Y1, Y2;
};

// Seeded multistart compass-search minimization of the defect over
// upper-triangular invertible candidates with condition numbers <= kappa_cap.
DefectResult defect_minimize(const CounterexampleScene& scene, double kappa_cap,
                             int budget, std::uint64_t seed, int grid_density);

}  // namespace cbsim
