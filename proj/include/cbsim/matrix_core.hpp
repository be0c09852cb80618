// Dense complex linear algebra used by every module: operator norms,
// spectra, block assembly, condition numbers.  Matrices are plain
// Eigen::MatrixXcd values; everything here is a pure function.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "cbsim/errors.hpp"

namespace cbsim {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

// Relative threshold below which a matrix counts as numerically singular.
inline constexpr double kSingularTol = 1e-12;

// Throws InvariantError if any entry is NaN/Inf.
void check_finite(const CMat& m, const char* context = "matrix");

// Largest singular value.  op_norm(m) == 0 iff m == 0.
double op_norm(const CMat& m);

// Largest eigenvalue modulus; zero for nilpotent matrices.
double spectral_radius(const CMat& m);

std::vector<Complex> eigenvalues(const CMat& m);

// Inverse guarded by the relative singularity threshold.
CMat inverse(const CMat& m);

// sigma_max / sigma_min; throws SingularityError near the threshold.
double condition(const CMat& m);

using BlockGrid = std::vector<std::vector<CMat>>;

// Assembles a d1 x d2 grid of equally sized blocks into one matrix.
CMat assemble_block(const BlockGrid& grid);

// Top singular triplet (sigma, u, v) with sigma = u^* m v.  Power iteration
// on m^* m with a deterministic start; falls back to full SVD when the
// iteration stagnates.  Intended for optimizer inner loops; op_norm() is the
// authoritative norm.
struct SingularTriplet {
    double sigma = 0.0;
    CVec u;
    CVec v;
};
SingularTriplet top_singular_triplet(const CMat& m, double rel_tol = 1e-12);

// Largest eigenvalue and eigenvector of a Hermitian matrix.
struct EigPair {
    double lambda = 0.0;
    CVec w;
};
EigPair top_eig_hermitian(const CMat& h);

// Hermitian square root / inverse square root of a positive definite matrix.
CMat sqrt_psd(const CMat& q);
CMat inv_sqrt_psd(const CMat& q);

}  // namespace cbsim
