#include "cbsim/model_space.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace cbsim {

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

double binom(int n, int k) {
    return factorial(n) / (factorial(k) * factorial(n - k));
}

// <D^q k_mu, D^p k_lambda> where D differentiates in the conjugated root
// parameter: the (p, q) mixed derivative of 1 / (1 - conj(mu) lambda).
Complex kernel_inner(Complex lambda, Complex mu, int p, int q) {
    Complex mub = std::conj(mu);
    Complex denom = 1.0 - mub * lambda;
    Complex sum = 0.0;
    for (int j = 0; j <= std::min(p, q); ++j) {
        double coeff = binom(p, j) * (factorial(q) / factorial(q - j)) *
                       factorial(q + p - j);
        sum += coeff * std::pow(lambda, q - j) * std::pow(mub, p - j) *
               std::pow(denom, -(p + q - j + 1));
    }
    return sum;
}

struct BasisIndex {
    Complex lambda;
    int p;
};

std::vector<BasisIndex> basis_indices(const BlaschkeProduct& theta) {
    std::vector<BasisIndex> idx;
    for (const BlaschkeRoot& r : theta.roots)
        for (int p = 0; p < r.mult; ++p) idx.push_back({r.lambda, p});
    return idx;
}

}  // namespace

void validate_blaschke(const BlaschkeProduct& theta) {
    if (theta.roots.empty()) throw ValidationError("at least one root required", "roots");
    for (const BlaschkeRoot& r : theta.roots) {
        if (r.mult < 1) throw ValidationError("multiplicity must be positive", "roots");
        if (std::abs(r.lambda) > 1.0 - 1e-8)
            throw ValidationError("root too close to the unit circle", "roots");
    }
    if (std::abs(std::abs(theta.constant) - 1.0) > 1e-12)
        throw ValidationError("constant must be unimodular", "constant");
}

bool has_simple_roots(const BlaschkeProduct& theta) {
    for (const BlaschkeRoot& r : theta.roots)
        if (r.mult != 1) return false;
    return true;
}

Complex blaschke_eval(const BlaschkeProduct& theta, Complex z) {
    validate_blaschke(theta);
    Complex out = theta.constant;
    for (const BlaschkeRoot& r : theta.roots) {
        Complex factor = (z - r.lambda) / (1.0 - std::conj(r.lambda) * z);
        for (int m = 0; m < r.mult; ++m) out *= factor;
    }
    return out;
}

CMat blaschke_apply(const BlaschkeProduct& theta, const CMat& s) {
    validate_blaschke(theta);
    if (s.rows() != s.cols()) throw DimensionError("blaschke_apply: matrix not square");
    const CMat id = CMat::Identity(s.rows(), s.cols());
    CMat out = theta.constant * id;
    for (const BlaschkeRoot& r : theta.roots) {
        CMat factor = (s - r.lambda * id) * inverse(id - std::conj(r.lambda) * s);
        for (int m = 0; m < r.mult; ++m) out = out * factor;
    }
    return out;
}

ModelOperator model_operator(const BlaschkeProduct& theta) {
    validate_blaschke(theta);
    std::vector<BasisIndex> idx = basis_indices(theta);
    const int n = static_cast<int>(idx.size());

    CMat gram(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            gram(i, j) = kernel_inner(idx[static_cast<std::size_t>(i)].lambda,
                                      idx[static_cast<std::size_t>(j)].lambda,
                                      idx[static_cast<std::size_t>(i)].p,
                                      idx[static_cast<std::size_t>(j)].p);
    gram = 0.5 * (gram + gram.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMat> es(gram);
    double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(n - 1);
    if (!(lmin > 0.0) || lmax / lmin > 1e12)
        throw ConditioningError("kernel Gram matrix too ill conditioned",
                                lmin > 0.0 ? lmax / lmin
                                           : std::numeric_limits<double>::infinity());
    CMat gh = es.eigenvectors() *
              es.eigenvalues().cwiseSqrt().asDiagonal().toDenseMatrix() *
              es.eigenvectors().adjoint();
    CMat ghi = es.eigenvectors() *
               es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal().toDenseMatrix() *
               es.eigenvectors().adjoint();

    // The backward shift acts on the derivative kernels as
    //   S* (D^p k_lambda) = conj(lambda) D^p k_lambda + p D^{p-1} k_lambda.
    CMat m = CMat::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        m(j, j) = std::conj(idx[static_cast<std::size_t>(j)].lambda);
        if (idx[static_cast<std::size_t>(j)].p > 0)
            m(j - 1, j) = static_cast<double>(idx[static_cast<std::size_t>(j)].p);
    }
    ModelOperator mo;
    mo.theta = theta;
    mo.S = ghi * m.adjoint() * gh;
    mo.gram = std::move(gram);
    return mo;
}

Complex poly_eval(const Poly& u, Complex z) {
    Complex acc = 0.0;
    for (auto it = u.rbegin(); it != u.rend(); ++it) acc = acc * z + *it;
    return acc;
}

CMat functional_calculus(const Poly& u, const ModelOperator& m) {
    const Eigen::Index n = m.S.rows();
    CMat acc = CMat::Zero(n, n);
    for (auto it = u.rbegin(); it != u.rend(); ++it)
        acc = acc * m.S + *it * CMat::Identity(n, n);
    return acc;
}

double quotient_norm_level(const std::vector<std::vector<Poly>>& grid,
                           const ModelOperator& m) {
    BlockGrid blocks(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (const Poly& u : grid[i]) blocks[i].push_back(functional_calculus(u, m));
    return op_norm(assemble_block(blocks));
}

std::vector<Complex> spectrum_quotient(const Poly& u, const BlaschkeProduct& theta) {
    ModelOperator m = model_operator(theta);
    std::vector<Complex> ev = eigenvalues(functional_calculus(u, m));
    std::vector<Complex> merged;
    for (Complex z : ev) {
        bool seen = false;
        for (Complex w : merged)
            if (std::abs(z - w) <= 1e-8) seen = true;
        if (!seen) merged.push_back(z);
    }
    return merged;
}

bool is_quasinilpotent(const Poly& u, const BlaschkeProduct& theta, double tol) {
    double radius = 0.0;
    for (Complex z : spectrum_quotient(u, theta)) radius = std::max(radius, std::abs(z));
    return radius <= tol;
}

double carleson_delta(const BlaschkeProduct& theta) {
    validate_blaschke(theta);
    if (!has_simple_roots(theta))
        throw ValidationError("Carleson separation requires simple roots", "roots");
    double delta = 1.0;
    const std::size_t n = theta.roots.size();
    for (std::size_t i = 0; i < n; ++i) {
        double prod = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            Complex lk = theta.roots[k].lambda, li = theta.roots[i].lambda;
            prod *= std::abs((li - lk) / (1.0 - std::conj(lk) * li));
        }
        delta = std::min(delta, prod);
    }
    return delta;
}

VasyuninResult vasyunin_similarity(const BlaschkeProduct& theta) {
    validate_blaschke(theta);
    if (!has_simple_roots(theta))
        throw ValidationError("diagonalization requires simple roots", "roots");
    ModelOperator m = model_operator(theta);
    const int n = m.S.rows();

    Eigen::ComplexEigenSolver<CMat> es(m.S);
    // Match computed eigenvalues to the declared root order.
    CMat w(n, n);
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i) {
        int best = -1;
        double dist = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            double d = std::abs(es.eigenvalues()(j) -
                                theta.roots[static_cast<std::size_t>(i)].lambda);
            if (d < dist) {
                dist = d;
                best = j;
            }
        }
        used[static_cast<std::size_t>(best)] = true;
        w.col(i) = es.eigenvectors().col(best).normalized();
    }

    // Minimize condition(W) over diagonal column rescalings by compass
    // search on the log scales (unit-norm columns are the start).
    Eigen::VectorXd logs = Eigen::VectorXd::Zero(n);
    auto cond_of = [&](const Eigen::VectorXd& l) {
        CMat ws = w;
        for (int j = 0; j < n; ++j) ws.col(j) *= std::exp(l(j));
        Eigen::JacobiSVD<CMat> svd(ws);
        double smin = svd.singularValues()(n - 1);
        if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
        return svd.singularValues()(0) / smin;
    };
    double cur = cond_of(logs);
    double step = 0.25;
    while (step > 1e-6) {
        bool moved = false;
        for (int j = 0; j < n; ++j)
            for (double dir : {+1.0, -1.0}) {
                Eigen::VectorXd trial = logs;
                trial(j) += dir * step;
                double c = cond_of(trial);
                if (c < cur - 1e-13) {
                    logs = trial;
                    cur = c;
                    moved = true;
                }
            }
        if (!moved) step *= 0.5;
    }
    for (int j = 0; j < n; ++j) w.col(j) *= std::exp(logs(j));
    if (cur > 1e12)
        throw ConditioningError("eigenvector matrix too ill conditioned", cur);

    VasyuninResult r;
    r.V = inverse(w);
    r.kappa = cur;
    r.delta_bound = 1.0 / cur;

    CMat d = CMat::Zero(n, n);
    for (int i = 0; i < n; ++i) d(i, i) = theta.roots[static_cast<std::size_t>(i)].lambda;
    if ((r.V * m.S * w - d).norm() > 1e-8 * (1.0 + d.norm()))
        throw InvariantError("diagonalization residual too large");
    return r;
}

EvalMapBounds eval_map_bounds(const Poly& u, const BlaschkeProduct& theta, int /*budget*/,
                              std::uint64_t /*seed*/) {
    VasyuninResult v = vasyunin_similarity(theta);
    ModelOperator m = model_operator(theta);
    EvalMapBounds b;
    for (const BlaschkeRoot& r : theta.roots)
        b.sup_values = std::max(b.sup_values, std::abs(poly_eval(u, r.lambda)));
    b.quotient = op_norm(functional_calculus(u, m));
    b.ratio = b.quotient > 0.0 ? b.sup_values / b.quotient : 1.0;
    if (b.sup_values > b.quotient + 1e-9)
        throw InvariantError("eigenvalue sup exceeded the quotient norm");
    if (b.quotient > b.sup_values / v.delta_bound + 1e-6)
        throw InvariantError("quotient norm exceeded the certified sandwich bound");
    return b;
}

Poly lagrange_representative(const BlaschkeProduct& theta,
                             const std::vector<Complex>& values) {
    validate_blaschke(theta);
    if (!has_simple_roots(theta))
        throw ValidationError("interpolation requires simple roots", "roots");
    if (values.size() != theta.roots.size())
        throw ValidationError("one value per root required", "values");
    const std::size_t n = theta.roots.size();
    Poly out(n, Complex(0, 0));
    for (std::size_t i = 0; i < n; ++i) {
        // Basis polynomial prod_{k != i} (z - lambda_k) / (lambda_i - lambda_k).
        Poly basis = {Complex(1, 0)};
        Complex denom = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            Complex lk = theta.roots[k].lambda;
            Poly next(basis.size() + 1, Complex(0, 0));
            for (std::size_t c = 0; c < basis.size(); ++c) {
                next[c + 1] += basis[c];
                next[c] -= lk * basis[c];
            }
            basis = std::move(next);
            denom *= theta.roots[i].lambda - lk;
        }
        Complex weight = values[i] / denom;
        for (std::size_t c = 0; c < basis.size(); ++c) out[c] += weight * basis[c];
    }
    return out;
}

}  // namespace cbsim
