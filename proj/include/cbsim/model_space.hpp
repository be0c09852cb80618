// Finite Blaschke products and the compressed shift on the associated
// finite-dimensional kernel space: construction from exact reproducing
// kernel Gram data (confluent derivatives for repeated roots), polynomial
// functional calculus and quotient norms, spectra, the Carleson separation
// constant, and the diagonalizing similarity with its certified constant.

#pragma once

#include <cstdint>
#include <vector>

#include "cbsim/matrix_core.hpp"

namespace cbsim {

struct BlaschkeRoot {
    Complex lambda;  // |lambda| <= 1 - 1e-8
    int mult = 1;
};

struct BlaschkeProduct {
    std::vector<BlaschkeRoot> roots;
    Complex constant = 1.0;  // unimodular
    int degree() const {
        int n = 0;
        for (const BlaschkeRoot& r : roots) n += r.mult;
        return n;
    }
};

// Throws ValidationError for roots outside the guarded disc, nonpositive
// multiplicities, degree zero, or a non-unimodular constant.
void validate_blaschke(const BlaschkeProduct& theta);

bool has_simple_roots(const BlaschkeProduct& theta);

// constant * prod_k ((z - lambda_k) / (1 - conj(lambda_k) z))^{m_k}.
Complex blaschke_eval(const BlaschkeProduct& theta, Complex z);

// The same product evaluated on a square matrix argument:
// each factor is (s - lambda)(I - conj(lambda) s)^{-1}.
CMat blaschke_apply(const BlaschkeProduct& theta, const CMat& s);

struct ModelOperator {
    BlaschkeProduct theta;
    CMat S;     // degree x degree compressed shift in an orthonormal basis
    CMat gram;  // Gram matrix of the (derivative) kernel basis used
};

// Throws ConditioningError when the kernel Gram condition exceeds 1e12.
ModelOperator model_operator(const BlaschkeProduct& theta);

// Polynomial with ascending coefficients: p[0] + p[1] z + ...
using Poly = std::vector<Complex>;

Complex poly_eval(const Poly& u, Complex z);

// u(S) by Horner evaluation.
CMat functional_calculus(const Poly& u, const ModelOperator& m);

// op_norm of the assembled block (u_ij(S)).
double quotient_norm_level(const std::vector<std::vector<Poly>>& grid,
                           const ModelOperator& m);

// Eigenvalues of u(S) merged at tolerance 1e-8; equals {u(lambda_k)}.
std::vector<Complex> spectrum_quotient(const Poly& u, const BlaschkeProduct& theta);

bool is_quasinilpotent(const Poly& u, const BlaschkeProduct& theta, double tol);

// min over n of prod_{k != n} |b_{lambda_k}(lambda_n)|; requires simple roots.
double carleson_delta(const BlaschkeProduct& theta);

struct VasyuninResult {
    CMat V;              // V S V^{-1} = diag(lambda_n)
    double kappa = 1.0;  // condition(V) after column rescaling
    double delta_bound = 1.0;  // 1 / kappa, certified two-sided constant
};

// Requires simple roots and eigenvector condition <= 1e12.
VasyuninResult vasyunin_similarity(const BlaschkeProduct& theta);

struct EvalMapBounds {
    double sup_values = 0.0;  // max_n |u(lambda_n)|
    double quotient = 0.0;    // |u(S)|
    double ratio = 1.0;       // sup_values / quotient (1 when both vanish)
};

// Also asserts sup_values <= quotient + 1e-9 and
// quotient <= sup_values / delta_bound + 1e-6; throws InvariantError else.
EvalMapBounds eval_map_bounds(const Poly& u, const BlaschkeProduct& theta, int budget,
                              std::uint64_t seed);

// Degree < N interpolation polynomial taking the given values at the (simple)
// roots: the canonical representative of a quotient class.
Poly lagrange_representative(const BlaschkeProduct& theta,
                             const std::vector<Complex>& values);

}  // namespace cbsim
