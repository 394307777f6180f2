#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/SparseCholesky>

#include "tubespec/errors.hpp"
#include "tubespec/types.hpp"

namespace tubespec {

struct EigenOptions {
    int k = 1;
    double sigma = 0.0;  // shift; A - sigma*M should be positive definite
    double tol = 1e-10;  // relative residual target
    int basis = 0;       // expanded Krylov columns per cycle, 0 = automatic
    int block = 3;       // start block, resolves multiplicities up to this size
    int max_cycles = 200;
    int dense_threshold = 400;
    bool force_dense = false;
    bool force_sparse = false;
    std::uint64_t seed = 0x5eed5eedULL;
};

template <class Scalar>
struct EigenResult {
    Vec values;
    MatT<Scalar> vectors;  // Euclidean-orthonormal columns (M-orthonormal if mass given)
    Vec residuals;         // ||A x - lambda M x|| / max(|lambda|, 1)
    int cycles = 0;
    bool dense = false;
};

template <class Scalar>
inline double real_part(const Scalar& s) {
    return std::real(s);
}

// Multiply by a unit scalar so that the entry of largest modulus is real
// and positive.
template <class Scalar>
void fix_sign(Eigen::Ref<VecT<Scalar>> v) {
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const Scalar p = v(imax);
    if (std::abs(p) == 0) return;
    v *= std::abs(p) / p;
}

template <class Scalar>
class ShiftInvert {
public:
    ShiftInvert(const SpMatT<Scalar>& A, double sigma) {
        SpMatT<Scalar> S = A;
        if (sigma != 0.0) {
            SpMatT<Scalar> Id(A.rows(), A.cols());
            Id.setIdentity();
            S = A - Scalar(sigma) * Id;
        }
        solver_.compute(S);
        if (solver_.info() != Eigen::Success) {
            throw FactorizationFailed("LDLT factorization failed at shift " + std::to_string(sigma) +
                                      "; try a larger shift constant K");
        }
        const auto& D = solver_.vectorD();
        for (Eigen::Index i = 0; i < D.size(); ++i) {
            if (!(std::isfinite(real_part(D(i)))) || real_part(D(i)) == 0.0) {
                throw FactorizationFailed("singular pivot at shift " + std::to_string(sigma) +
                                          "; try a larger shift constant K");
            }
        }
    }
    VecT<Scalar> solve(const VecT<Scalar>& b) const { return solver_.solve(b); }

private:
    Eigen::SimplicialLDLT<SpMatT<Scalar>, Eigen::Lower, Eigen::AMDOrdering<int>> solver_;
};

namespace detail {

template <class Scalar>
VecT<Scalar> random_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    VecT<Scalar> v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if constexpr (std::is_same_v<Scalar, double>) {
            v(i) = nd(rng);
        } else {
            v(i) = Scalar(nd(rng), nd(rng));
        }
    }
    return v;
}

// Two passes of classical Gram-Schmidt. Returns false when w lies in the
// span of the first ncols columns of V.
template <class Scalar>
bool orthonormalize(const MatT<Scalar>& V, Eigen::Index ncols, VecT<Scalar>& w) {
    const double w0 = w.norm();
    if (w0 == 0) return false;
    for (int pass = 0; pass < 2; ++pass) {
        if (ncols > 0) {
            VecT<Scalar> c = V.leftCols(ncols).adjoint() * w;
            w -= V.leftCols(ncols) * c;
        }
    }
    const double nw = w.norm();
    if (nw < 1e-10 * w0) return false;
    w /= nw;
    return true;
}

template <class Scalar>
EigenResult<Scalar> dense_smallest(const SpMatT<Scalar>& A, int k) {
    MatT<Scalar> D = MatT<Scalar>(A);
    D = (D + D.adjoint().eval()) * 0.5;
    Eigen::SelfAdjointEigenSolver<MatT<Scalar>> es(D);
    if (es.info() != Eigen::Success) throw EigensolverDiverged("dense eigensolver failed");
    EigenResult<Scalar> r;
    r.dense = true;
    r.values = es.eigenvalues().head(k);
    r.vectors = es.eigenvectors().leftCols(k);
    r.residuals.resize(k);
    for (int i = 0; i < k; ++i) {
        VecT<Scalar> x = r.vectors.col(i);
        r.residuals(i) = (A * x - r.values(i) * x).norm() / std::max(std::abs(r.values(i)), 1.0);
    }
    return r;
}

}  // namespace detail

// k smallest eigenpairs of the Hermitian matrix A, or of the pencil (A, M)
// with M = diag(mass) > 0. Thick-restart block Lanczos on (A - sigma)^{-1}
// with full reorthogonalisation; small problems go through a dense solver.
template <class Scalar>
EigenResult<Scalar> smallest_eigs(const SpMatT<Scalar>& A0, const EigenOptions& opt,
                                  const Vec* mass = nullptr) {
    const Eigen::Index n = A0.rows();
    if (opt.k < 1 || opt.k >= n) {
        throw EigensolverDiverged("requested " + std::to_string(opt.k) + " eigenpairs of a " +
                                  std::to_string(n) + "-dimensional operator");
    }
    SpMatT<Scalar> A = A0;
    Vec msq;
    if (mass) {
        msq = mass->cwiseSqrt().cwiseInverse();
        A = msq.asDiagonal() * A0 * msq.asDiagonal();
    }
    auto finish = [&](EigenResult<Scalar> r) {
        for (int i = 0; i < r.vectors.cols(); ++i) {
            if (mass) r.vectors.col(i) = msq.asDiagonal() * r.vectors.col(i);
            fix_sign<Scalar>(r.vectors.col(i));
        }
        return r;
    };
    const bool dense = opt.force_dense || (!opt.force_sparse && n < opt.dense_threshold);
    if (dense) return finish(detail::dense_smallest(A, opt.k));

    const int k = opt.k;
    const int bs = std::max(1, std::min<int>(opt.block, static_cast<int>(n) - k));
    const int m = static_cast<int>(std::min<Eigen::Index>(
        opt.basis > 0 ? opt.basis : std::max(2 * k + 30, 60), n - bs));
    const int keep = std::min(m - 1, k + std::max(k, 8));

    ShiftInvert<Scalar> op(A, opt.sigma);
    std::mt19937_64 rng(opt.seed);
    // Attainable residual floor: shift-invert solves lose about 1e-11 ||A||.
    double anorm = 0.0;
    {
        Vec rows = Vec::Zero(n);
        for (Eigen::Index c = 0; c < A.outerSize(); ++c)
            for (typename SpMatT<Scalar>::InnerIterator it(A, c); it; ++it) rows(it.row()) += std::abs(it.value());
        anorm = rows.maxCoeff();
    }

    MatT<Scalar> V(n, m + bs);
    MatT<Scalar> W(n, m);
    int ne = 0;  // expanded columns (have W)
    int nv = 0;  // total columns
    for (int b = 0; b < bs; ++b) {
        VecT<Scalar> v = detail::random_vector<Scalar>(n, rng);
        if (detail::orthonormalize<Scalar>(V, nv, v)) V.col(nv++) = v;
    }

    Vec lam(k), res(k);
    MatT<Scalar> X(n, k);
    for (int cycle = 1; cycle <= opt.max_cycles; ++cycle) {
        while (ne < m && ne < nv) {
            VecT<Scalar> w = op.solve(V.col(ne));
            W.col(ne) = w;
            ++ne;
            if (nv < m + bs) {
                VecT<Scalar> nvcol = w;
                int tries = 0;
                while (!detail::orthonormalize<Scalar>(V, nv, nvcol) && tries < 3) {
                    nvcol = detail::random_vector<Scalar>(n, rng);
                    ++tries;
                }
                if (tries < 3) V.col(nv++) = nvcol;
            }
        }
        MatT<Scalar> H = V.leftCols(ne).adjoint() * W.leftCols(ne);
        H = (H + H.adjoint().eval()) * 0.5;
        Eigen::SelfAdjointEigenSolver<MatT<Scalar>> es(H);
        // Largest theta <-> smallest lambda above sigma.
        const Vec theta = es.eigenvalues().reverse();
        const MatT<Scalar> Y = es.eigenvectors().rowwise().reverse();
        const int kk = std::min(k, ne);
        bool ok = kk == k;
        for (int i = 0; i < kk; ++i) {
            VecT<Scalar> x = V.leftCols(ne) * Y.col(i);
            x.normalize();
            const double l = opt.sigma + 1.0 / theta(i);
            lam(i) = l;
            X.col(i) = x;
            res(i) = (A * x - Scalar(l) * x).norm() / std::max(std::abs(l), 1.0);
            if (!(res(i) <= std::max(opt.tol, 1e-11 * anorm / std::max(std::abs(l), 1.0)))) ok = false;
        }
        if (ok || ne == n) {
            EigenResult<Scalar> r;
            r.values = lam;
            r.vectors = X;
            r.residuals = res;
            r.cycles = cycle;
            return finish(r);
        }
        if (cycle == opt.max_cycles) break;
        const int p = std::min(keep, ne);
        MatT<Scalar> Vk = V.leftCols(ne) * Y.leftCols(p);
        MatT<Scalar> Wk = W.leftCols(ne) * Y.leftCols(p);
        const int pending = nv - ne;
        MatT<Scalar> P = V.middleCols(ne, pending);
        V.leftCols(p) = Vk;
        V.middleCols(p, pending) = P;
        W.leftCols(p) = Wk;
        ne = p;
        nv = p + pending;
    }
    std::ostringstream os;
    os << "no convergence after " << opt.max_cycles << " cycles; residuals:";
    for (int i = 0; i < k; ++i) os << " " << res(i);
    throw EigensolverDiverged(os.str());
}

}  // namespace tubespec
