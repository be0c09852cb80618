// Deterministic randomness: every stochastic routine takes one 64-bit seed
// and derives per-restart streams with splitmix64, so identical seeds give
// bit-identical runs regardless of how restarts are scheduled.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>

namespace cbsim {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream `i` of a run seeded with `seed`.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t i) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(i)));
}

inline Eigen::MatrixXcd random_gaussian_matrix(int rows, int cols, std::mt19937_64& gen) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXcd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = std::complex<double>(nd(gen), nd(gen));
    return m;
}

// Haar-ish unitary from the QR of a Ginibre matrix.
inline Eigen::MatrixXcd random_unitary(int n, std::mt19937_64& gen) {
    Eigen::MatrixXcd g = random_gaussian_matrix(n, n, gen);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    Eigen::MatrixXcd q = qr.householderQ();
    Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        std::complex<double> d = r(j, j);
        double a = std::abs(d);
        q.col(j) *= (a > 0) ? d / a : 1.0;
    }
    return q;
}

}  // namespace cbsim
