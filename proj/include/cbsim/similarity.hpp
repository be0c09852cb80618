// Similarity constructions: the Paulsen-type similarity step, the
// alternating X_n / Y_n iteration with its monotone norm chain, the
// almost-isometric selection with all its certificate constants, conjugation
// lower-bound diagnostics, and the joint-similarity chain check.
//
// The similarity step searches over positive definite X = Q^{1/2}.  For a
// fixed set of norm constraints the condition "a -> X f(a) X^{-1} respects
// them" is a family of linear matrix inequalities in Q, so the step runs a
// cutting-plane loop: harvest violating block inputs by seeded ascent, then
// re-solve a small semidefinite program that minimizes the condition number
// of X over the accumulated constraints.

#pragma once

#include <cstdint>
#include <vector>

#include "cbsim/operator_space.hpp"

namespace cbsim {

struct SimilarityStepResult {
    CMat X;                        // positive definite, scaled so |X| = |X^{-1}|
    double achieved_cb_bound = 0;  // best ratio found for the conjugated map
    double kappa = 0;              // condition(X)
    double target_cb = 0;          // cb estimate of the raw map
};

// A norm constraint the similarity must honor exactly: the image-side block
// g may not exceed norm r after conjugation by I (x) X.
struct NormCut {
    CMat g;        // (d*n) x (d*n), n = ambient dimension X acts on
    double r = 0;  // required bound, from the domain side of the map
};

struct PaulsenOptions {
    std::vector<NormCut> cuts;       // honored exactly (up to 1e-12 relative)
    double cc_tol = 1e-7;            // acceptance threshold for the verified ratio
    double kappa_tol = 5e-4;  // absolute accuracy of the minimized kappa
    int verify_rounds = 24;
    int verify_budget = 0;           // 0: derived from budget
    int preseed_cuts = -1;           // extra random exact-norm cuts; -1: derived
    int target_budget = 0;           // restarts for the raw cb estimate; 0: budget
};

// Paulsen-type similarity step: X positive definite with a -> X f(a) X^{-1}
// completely contractive (verified by search) and condition(X) no larger
// than the cb norm the cuts allow.  Deterministic for a fixed seed.
SimilarityStepResult paulsen_step(const CBLinearMap& f, int budget, std::uint64_t seed,
                                  const PaulsenOptions& opts = {});

struct MonitoredElement {
    CMat a;
    std::vector<Complex> lambdas;  // offsets: f_n rows are |X_n (a + l I) X_n^{-1}|
};

struct IterateOptions {
    std::vector<MonitoredElement> monitors;  // enforced as level-1 cuts each step
    double cc_tol = 1e-7;
    int stop_after = 0;      // 0: run all n_max iterations; otherwise unused slots stay empty
};

struct IterationTrace {
    std::vector<CMat> X_seq;  // X_1 .. X_n
    std::vector<CMat> Y_seq;  // Y_1 .. Y_n
    // chain[p] = (|A_p|, |(Y_1 phi(a) Y_1^-1)|, |(X_1 a X_1^-1)|, ...) per probe.
    std::vector<std::vector<double>> chain;
    // f_rows[e][n][g]: monitored element e, iterate n (n = 0 is X_0 = I).
    std::vector<std::vector<std::vector<double>>> f_rows;
};

// Alternating similarity iteration; each half step honors the probes and
// monitored elements as cuts, so the recorded chain is weakly decreasing.
IterationTrace iterate_xy(const CBLinearMap& f, const std::vector<BlockGrid>& probes,
                          int n_max, int budget, std::uint64_t seed,
                          const IterateOptions& opts = {});

// Unimodular zeta with spectral_radius(a + delta * zeta * I) >= delta for
// every delta > 0: aligned with a maximal-modulus eigenvalue, 1 for
// (quasi)nilpotent a.
Complex select_zeta(const CMat& a, double delta);

struct AlmostIsometryReport {
    CMat X;
    CMat Y;
    double epsilon = 0;
    int N = 0;
    double delta = 0;
    std::vector<Complex> zeta;           // per element of A0
    double rho = 0;
    double sigma = 1;
    double bound_factor = 0;
    std::vector<double> measured_ratios;  // |X a X^-1| / |Y phi(a) Y^-1|
    bool quasinilpotent_branch = false;   // true: delta > 0 branch was used
    IterationTrace trace;
};

struct AlmostIsometricOptions {
    int max_iterations = 12;
    int grid_radii = 61;
    int grid_angles = 61;
    int max_delta_halvings = 40;
    double cc_tol = 1e-7;
};

AlmostIsometryReport almost_isometric(const CBLinearMap& f, const std::vector<CMat>& A0,
                                      double epsilon, int budget, std::uint64_t seed,
                                      const AlmostIsometricOptions& opts = {});

struct ClbpResult {
    double ratio = 0;   // cb_est / kappa
    double cb_est = 0;
    double kappa = 0;
};

// Conjugation lower-bound diagnostic: how much of |X| |X^-1| the cb norm of
// a -> X a X^{-1} retains on the given algebra.
ClbpResult clbp_defect(const CMat& x, const OperatorSubspace& alg, int budget,
                       std::uint64_t seed);

struct JointSimilarityResult {
    bool forward_ok = false;
    bool adjoint_ok = false;
    bool norm_recovered = false;
    double forward_ratio = 0;
    double adjoint_ratio = 0;
    double max_norm_gap = 0;  // max | |(t_ij)| - |(theta(t_ij))| | over probes
};

// Checks that t -> Z theta(t) Z^{-1} and its adjoint companion are both
// completely contractive, then validates norm recovery on probe blocks.
JointSimilarityResult verify_joint_similarity(const CMat& z, const CBLinearMap& theta,
                                              int budget, std::uint64_t seed);

}  // namespace cbsim
