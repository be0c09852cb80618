// Concrete operator subspaces and algebras inside M_n, linear maps between
// them, and matrix-level / completely bounded norm machinery.
//
// cb norms are computed as certified lower bounds: a seeded multistart
// ascent over unit-ball block inputs at amplification level equal to the
// codomain ambient dimension (that level is exact for maps into M_n).

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cbsim/matrix_core.hpp"

namespace cbsim {

inline constexpr double kSpanTol = 1e-10;

// Linear span of matrices inside some M_n; optionally a unital algebra.
class OperatorSubspace {
public:
    OperatorSubspace(int ambient_dim, std::vector<CMat> basis, bool unital_algebra);

    int ambient_dim() const { return ambient_dim_; }
    int dim() const { return static_cast<int>(basis_.size()); }
    const std::vector<CMat>& basis() const { return basis_; }
    bool is_unital_algebra() const { return unital_algebra_; }

    // Coefficients c with m = sum c_k b_k; throws NotInSpanError when the
    // least-squares residual exceeds 1e-9 * (1 + |m|).
    CVec coordinates(const CMat& m) const;

    CMat from_coordinates(const CVec& c) const;

    // Residual of the best span approximation, without throwing.
    double span_residual(const CMat& m) const;

    static OperatorSubspace full_matrix_algebra(int n);
    static OperatorSubspace scalar_algebra(int n);

private:
    int ambient_dim_;
    std::vector<CMat> basis_;
    bool unital_algebra_;
    Eigen::MatrixXcd vec_basis_;               // n^2 x k, column = vec(b_k)
    Eigen::ColPivHouseholderQR<CMat> solver_;  // least squares on vec_basis_
};

// A linear map between two subspaces given by its action on the domain basis.
class CBLinearMap {
public:
    CBLinearMap(OperatorSubspace domain, OperatorSubspace codomain,
                std::vector<CMat> images, bool unital = false, bool multiplicative = false);

    const OperatorSubspace& domain() const { return domain_; }
    const OperatorSubspace& codomain() const { return codomain_; }
    const std::vector<CMat>& images() const { return images_; }
    bool unital() const { return unital_; }
    bool multiplicative() const { return multiplicative_; }

    CMat apply(const CMat& m) const;

    // Map with domain and codomain exchanged; requires a bijective action.
    CBLinearMap inverse_map() const;

    // a -> T a T^{-1} restricted to the given algebra.
    static CBLinearMap conjugation(const OperatorSubspace& alg, const CMat& t);

private:
    OperatorSubspace domain_;
    OperatorSubspace codomain_;
    std::vector<CMat> images_;
    bool unital_;
    bool multiplicative_;
};

// Entrywise application of the map to a block grid.
BlockGrid apply_map_level(const CBLinearMap& f, const BlockGrid& block);

// op_norm of the assembled block, with every entry checked against the span.
double level_norm(const OperatorSubspace& space, const BlockGrid& block);

// sum_k kron(C_k, B_k): the assembled level-d block with entries
// sum_k C_k(i,j) B_k, for n x n matrices B_k.
CMat coeff_block(const std::vector<CMat>& coeffs, const std::vector<CMat>& mats, int n);

// Block input at level d encoded by one coefficient matrix per basis element:
// grid(i,j) = sum_k C_k(i,j) b_k.
struct CbWitness {
    std::vector<CMat> coeffs;  // d x d, one per domain basis element
    double input_norm = 0.0;
    double output_norm = 0.0;
    double ratio() const { return input_norm > 0 ? output_norm / input_norm : 0.0; }
};

struct CbEstimate {
    double lower = 0.0;
    int level_used = 0;
    CbWitness witness;
};

// Best ratio found by `budget` seeded restarts of gradient ascent at the
// exact level d = codomain ambient dimension.  Monotone in budget for a
// fixed seed; never an upper bound claim.
CbEstimate cb_norm_estimate(const CBLinearMap& f, int budget, std::uint64_t seed);

// Single ascent run from a given starting point (exposed for reuse by the
// similarity engine's witness searches).
CbWitness cb_ascent(const CBLinearMap& f, std::vector<CMat> start_coeffs,
                    int max_iters = 300);

BlockGrid witness_grid(const OperatorSubspace& space, const CbWitness& w);

struct ContractivityReport {
    bool verdict = false;
    double worst_ratio = 0.0;
    CbWitness witness;
};

ContractivityReport is_completely_contractive(const CBLinearMap& f, double tol,
                                              int budget, std::uint64_t seed);

}  // namespace cbsim
