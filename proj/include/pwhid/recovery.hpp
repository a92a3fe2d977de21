///
/// \file recovery.hpp
///
/// Low-rank recovery of a third-order tensor from linear samples
/// y ~ P vec([[A, B, H]]) by partial alternating least squares.
///
#ifndef PWHID_RECOVERY_HPP
#define PWHID_RECOVERY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/SVD>
#include <Eigen/SparseCore>

#include <pwhid/sampling.hpp>
#include <pwhid/tensor_core.hpp>

namespace pwhid
{

struct ALSOptions
{
    int max_cycles             = 250;
    double rel_change_tol      = 1e-12;
    /// Singular values at or below pinv_cutoff * sigma_max are discarded.
    double pinv_cutoff         = 1e-12;
    int restarts               = 10;
    std::uint64_t seed         = 0;
    bool normalize_each_cycle  = true;
    /// A run counts as converged when residual <= success_threshold * |y|.
    double success_threshold   = 1e-6;
    bool parallel_restarts     = false;

    void validate() const
    {
        if (max_cycles < 1 || restarts < 1)
        {
            throw std::invalid_argument(
                "ALSOptions: max_cycles and restarts must be at least 1");
        }
        if (!(rel_change_tol > 0.0) || !(pinv_cutoff > 0.0) ||
            !(success_threshold > 0.0))
        {
            throw std::invalid_argument("ALSOptions: tolerances must be > 0");
        }
    }
};

struct LeastSquaresSolution
{
    CVector x;
    Index rank = 0;
};

/// Minimum-norm least-squares solution through a truncated SVD.
inline LeastSquaresSolution pinv_solve(const CMatrix& Z, const CVector& y,
                                       double cutoff)
{
    Eigen::JacobiSVD<CMatrix> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(cutoff);
    return {svd.solve(y), svd.rank()};
}

//-----------------------------------------------------------------------------
// Structured right factors S with Z = P S. Row index of vec(T) is
// i + L1 j + L1 L2 k.
//-----------------------------------------------------------------------------

/// (H kr B) kron I_{L1}; column i + L1 l.
inline SparseCMatrix structure_for_A(Index L1, const CMatrix& B,
                                     const CMatrix& H)
{
    const Index L2 = B.rows();
    const Index L3 = H.rows();
    const Index r  = B.cols();
    std::vector<Eigen::Triplet<Complex>> t;
    t.reserve(static_cast<std::size_t>(L1 * L2 * L3 * r));
    for (Index l = 0; l < r; ++l)
        for (Index k = 0; k < L3; ++k)
            for (Index j = 0; j < L2; ++j)
            {
                const Complex w = B(j, l) * H(k, l);
                for (Index i = 0; i < L1; ++i)
                {
                    t.emplace_back(i + L1 * (j + L2 * k), i + L1 * l, w);
                }
            }
    SparseCMatrix S(L1 * L2 * L3, L1 * r);
    S.setFromTriplets(t.begin(), t.end());
    return S;
}

/// [h_l kron I_{L2} kron a_l]_l; column j + L2 l.
inline SparseCMatrix structure_for_B(Index L2, const CMatrix& A,
                                     const CMatrix& H)
{
    const Index L1 = A.rows();
    const Index L3 = H.rows();
    const Index r  = A.cols();
    std::vector<Eigen::Triplet<Complex>> t;
    t.reserve(static_cast<std::size_t>(L1 * L2 * L3 * r));
    for (Index l = 0; l < r; ++l)
        for (Index k = 0; k < L3; ++k)
            for (Index j = 0; j < L2; ++j)
                for (Index i = 0; i < L1; ++i)
                {
                    t.emplace_back(i + L1 * (j + L2 * k), j + L2 * l,
                                   A(i, l) * H(k, l));
                }
    SparseCMatrix S(L1 * L2 * L3, L2 * r);
    S.setFromTriplets(t.begin(), t.end());
    return S;
}

/// [I_{L3} kron b_l kron a_l]_l; column k + L3 l.
inline SparseCMatrix structure_for_H(Index L3, const CMatrix& A,
                                     const CMatrix& B)
{
    const Index L1 = A.rows();
    const Index L2 = B.rows();
    const Index r  = A.cols();
    std::vector<Eigen::Triplet<Complex>> t;
    t.reserve(static_cast<std::size_t>(L1 * L2 * L3 * r));
    for (Index l = 0; l < r; ++l)
        for (Index k = 0; k < L3; ++k)
            for (Index j = 0; j < L2; ++j)
                for (Index i = 0; i < L1; ++i)
                {
                    t.emplace_back(i + L1 * (j + L2 * k), k + L3 * l,
                                   A(i, l) * B(j, l));
                }
    SparseCMatrix S(L1 * L2 * L3, L3 * r);
    S.setFromTriplets(t.begin(), t.end());
    return S;
}

namespace detail
{

inline void check_shapes(const SamplingOperator& P, const CVector& y,
                         Index L1, Index L2, Index L3, Index r)
{
    if (y.size() != P.rows())
    {
        throw SizeError("ALS: gradient vector length " +
                        std::to_string(y.size()) + " != P rows " +
                        std::to_string(P.rows()));
    }
    if (L1 != P.front_length() || L2 != P.back_length() ||
        L3 != P.third_dim())
    {
        throw SizeError("ALS: factor shapes do not match the sampling "
                        "operator");
    }
    if (r < 1)
    {
        throw std::invalid_argument("ALS: rank must be at least 1");
    }
}

inline CMatrix reshape_columns(const CVector& x, Index rows, Index cols)
{
    return Eigen::Map<const CMatrix>(x.data(), rows, cols);
}

} // namespace detail

inline CMatrix z_matrix_A(const SamplingOperator& P, const CMatrix& B,
                          const CMatrix& H)
{
    return CMatrix(P.matrix() * structure_for_A(P.front_length(), B, H));
}

inline CMatrix z_matrix_B(const SamplingOperator& P, const CMatrix& A,
                          const CMatrix& H)
{
    return CMatrix(P.matrix() * structure_for_B(P.back_length(), A, H));
}

inline CMatrix z_matrix_H(const SamplingOperator& P, const CMatrix& A,
                          const CMatrix& B)
{
    return CMatrix(P.matrix() * structure_for_H(P.third_dim(), A, B));
}

struct BlockUpdate
{
    CMatrix factor;
    Index rank = 0;      ///< numerical rank of Z
    double residual = 0; ///< |Z vec(factor) - y|
};

namespace detail
{

inline BlockUpdate solve_block(const CMatrix& Z, const CVector& y, Index rows,
                               Index r, double cutoff)
{
    auto sol = pinv_solve(Z, y, cutoff);
    BlockUpdate up;
    up.residual = (Z * sol.x - y).norm();
    up.factor   = reshape_columns(sol.x, rows, r);
    up.rank     = sol.rank;
    return up;
}

} // namespace detail

/// vec(A) = pinv(Z_A) y with Z_A = P ((H kr B) kron I_{L1}).
inline BlockUpdate als_update_A(const SamplingOperator& P, const CVector& y,
                                const CMatrix& B, const CMatrix& H,
                                double cutoff = 1e-12)
{
    detail::check_shapes(P, y, P.front_length(), B.rows(), H.rows(), B.cols());
    if (H.cols() != B.cols())
    {
        throw SizeError("als_update_A: B and H column counts differ");
    }
    return detail::solve_block(z_matrix_A(P, B, H), y, P.front_length(),
                               B.cols(), cutoff);
}

/// vec(B) = pinv(Z_B) y with Z_B = P [h_l kron I_{L2} kron a_l].
inline BlockUpdate als_update_B(const SamplingOperator& P, const CVector& y,
                                const CMatrix& A, const CMatrix& H,
                                double cutoff = 1e-12)
{
    detail::check_shapes(P, y, A.rows(), P.back_length(), H.rows(), A.cols());
    if (H.cols() != A.cols())
    {
        throw SizeError("als_update_B: A and H column counts differ");
    }
    return detail::solve_block(z_matrix_B(P, A, H), y, P.back_length(),
                               A.cols(), cutoff);
}

///
/// vec(H) = pinv(Z_H) y with Z_H = P [I_{L3} kron b_l kron a_l].
///
/// Z_H inherits the slice structure of P: rows of slice k only touch the
/// columns k + L3 l. The pseudoinverse is assembled from the SVDs of these
/// L x r blocks, truncated against the largest singular value over all
/// blocks, which equals the truncated pseudoinverse of Z_H itself.
///
inline BlockUpdate als_update_H(const SamplingOperator& P, const CVector& y,
                                const CMatrix& A, const CMatrix& B,
                                double cutoff = 1e-12)
{
    detail::check_shapes(P, y, A.rows(), B.rows(), P.third_dim(), A.cols());
    if (B.cols() != A.cols())
    {
        throw SizeError("als_update_H: A and B column counts differ");
    }
    const CMatrix Z = z_matrix_H(P, A, B);
    const Index L   = P.memory_length();
    const Index L3  = P.third_dim();
    const Index r   = A.cols();

    std::vector<Eigen::JacobiSVD<CMatrix>> svds;
    svds.reserve(static_cast<std::size_t>(L3));
    double sigma_max = 0.0;
    for (Index k = 0; k < L3; ++k)
    {
        CMatrix block(L, r);
        for (Index l = 0; l < r; ++l)
        {
            block.col(l) = Z.col(k + L3 * l).segment(k * L, L);
        }
        svds.emplace_back(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svds.back().singularValues().size() > 0)
        {
            sigma_max = std::max(sigma_max, svds.back().singularValues()[0]);
        }
    }

    const double tol = cutoff * sigma_max;
    BlockUpdate up;
    up.factor = CMatrix::Zero(L3, r);
    for (Index k = 0; k < L3; ++k)
    {
        const auto& svd = svds[static_cast<std::size_t>(k)];
        const auto& sv  = svd.singularValues();
        CVector coeff   = svd.matrixU().adjoint() * y.segment(k * L, L);
        for (Index i = 0; i < sv.size(); ++i)
        {
            if (sv[i] > tol)
            {
                coeff[i] /= sv[i];
                ++up.rank;
            }
            else
            {
                coeff[i] = 0.0;
            }
        }
        up.factor.row(k) = (svd.matrixV() * coeff).transpose();
    }
    CVector x(L3 * r);
    for (Index l = 0; l < r; ++l)
    {
        x.segment(l * L3, L3) = up.factor.col(l);
    }
    up.residual = (Z * x - y).norm();
    return up;
}

/// |P vec([[A, B, H]]) - y|_2.
inline double residual(const SamplingOperator& P, const CVector& y,
                       const CPDFactors& f)
{
    return (P.apply(cpd_vector(f)) - y).norm();
}

///
/// Rescale so every column of A and B has unit norm, folding the scales
/// into H. [[A, B, H]] is unchanged.
///
inline void normalize_factors(CPDFactors& f)
{
    for (Index l = 0; l < f.rank(); ++l)
    {
        const double na = f.A.col(l).norm();
        const double nb = f.B.col(l).norm();
        if (na == 0.0 || nb == 0.0)
        {
            continue;
        }
        f.A.col(l) /= na;
        f.B.col(l) /= nb;
        f.H.col(l) *= na * nb;
    }
}

/// I.i.d. standard complex Gaussian factors (E|z|^2 = 1).
inline CPDFactors random_factors(Index L1, Index L2, Index L3, Index r,
                                 std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    auto draw = [&](Index rows) {
        CMatrix m(rows, r);
        for (Index l = 0; l < r; ++l)
            for (Index i = 0; i < rows; ++i)
            {
                const double re = normal(rng);
                const double im = normal(rng);
                m(i, l)         = Complex(re, im);
            }
        return m;
    };
    CPDFactors f;
    f.A = draw(L1);
    f.B = draw(L2);
    f.H = draw(L3);
    return f;
}

/// Generator for restart `index` of a run seeded with `seed`.
inline std::mt19937_64 restart_rng(std::uint64_t seed, std::size_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    return std::mt19937_64(seq);
}

///
/// ### ALSRun
///
/// One partial ALS trajectory. `residual_history[c]` is the residual after
/// cycle c + 1; `block_residuals` holds the residual after every single block
/// update (three per cycle, A then B then H).
///
struct ALSRun
{
    CPDFactors factors;
    std::vector<double> residual_history;
    std::vector<double> block_residuals;
    double initial_residual = 0.0;
    bool converged          = false;
    int cycles_used         = 0;
    Index min_rank          = 0; ///< smallest numerical rank of any Z seen
    Index max_rank          = 0;

    double final_residual() const
    {
        return residual_history.empty() ? initial_residual
                                        : residual_history.back();
    }
};

struct ALSResult
{
    CPDFactors factors;
    std::vector<double> residual_history;
    bool converged  = false;
    int cycles_used = 0;
    std::size_t best_restart = 0;
    std::vector<ALSRun> runs;

    double final_residual() const
    {
        return runs.at(best_restart).final_residual();
    }
};

/// Runs partial ALS from the given starting factors.
inline ALSRun als_run(const SamplingOperator& P, const CVector& y,
                      CPDFactors init, const ALSOptions& opts)
{
    opts.validate();
    init.validate();
    detail::check_shapes(P, y, init.A.rows(), init.B.rows(), init.H.rows(),
                         init.rank());

    ALSRun run;
    run.factors          = std::move(init);
    run.initial_residual = residual(P, y, run.factors);
    run.min_rank         = std::numeric_limits<Index>::max();
    auto& f              = run.factors;
    const double cutoff  = opts.pinv_cutoff;

    auto track = [&run](const BlockUpdate& up) {
        run.block_residuals.push_back(up.residual);
        run.min_rank = std::min(run.min_rank, up.rank);
        run.max_rank = std::max(run.max_rank, up.rank);
    };

    double previous = run.initial_residual;
    for (int cycle = 1; cycle <= opts.max_cycles; ++cycle)
    {
        auto upA = als_update_A(P, y, f.B, f.H, cutoff);
        f.A      = std::move(upA.factor);
        track(upA);

        auto upB = als_update_B(P, y, f.A, f.H, cutoff);
        f.B      = std::move(upB.factor);
        track(upB);

        auto upH = als_update_H(P, y, f.A, f.B, cutoff);
        f.H      = std::move(upH.factor);
        track(upH);

        if (opts.normalize_each_cycle)
        {
            normalize_factors(f);
        }
        const double current = residual(P, y, f);
        run.residual_history.push_back(current);
        run.cycles_used = cycle;

        const double change = std::abs(previous - current);
        if (current == 0.0 ||
            change < opts.rel_change_tol * std::max(previous, 1e-300))
        {
            break;
        }
        previous = current;
    }
    run.converged =
        run.final_residual() <= opts.success_threshold * std::max(y.norm(), 1e-300) ||
        run.final_residual() == 0.0;
    return run;
}

///
/// Partial ALS with `opts.restarts` seeded Gaussian starting points; the
/// run with the smallest final residual wins, ties going to the lower
/// restart index.
///
inline ALSResult partial_als(const SamplingOperator& P, const CVector& y,
                             Index r, const ALSOptions& opts)
{
    opts.validate();
    detail::check_shapes(P, y, P.front_length(), P.back_length(),
                         P.third_dim(), r);

    const auto n = static_cast<std::size_t>(opts.restarts);
    auto one     = [&](std::size_t index) {
        auto rng = restart_rng(opts.seed, index);
        return als_run(P, y,
                       random_factors(P.front_length(), P.back_length(),
                                      P.third_dim(), r, rng),
                       opts);
    };

    ALSResult res;
    res.runs.reserve(n);
    if (opts.parallel_restarts)
    {
        std::vector<std::future<ALSRun>> jobs;
        for (std::size_t i = 0; i < n; ++i)
        {
            jobs.push_back(std::async(std::launch::async, one, i));
        }
        for (auto& j : jobs)
        {
            res.runs.push_back(j.get());
        }
    }
    else
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            res.runs.push_back(one(i));
        }
    }

    for (std::size_t i = 1; i < n; ++i)
    {
        if (res.runs[i].final_residual() <
            res.runs[res.best_restart].final_residual())
        {
            res.best_restart = i;
        }
    }
    const auto& best     = res.runs[res.best_restart];
    res.factors          = best.factors;
    res.residual_history = best.residual_history;
    res.converged        = best.converged;
    res.cycles_used      = best.cycles_used;
    return res;
}

} // namespace pwhid

#endif /* PWHID_RECOVERY_HPP */
