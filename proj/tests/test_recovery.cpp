#include <gtest/gtest.h>

#include "support.hpp"

using namespace pwhid;

namespace
{

struct Problem
{
    SamplingOperator P;
    CVector y;
    PWHSystem sys;
};

Problem exact_problem(Index r, Index L1, Index L2, Index d, Index N,
                      std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    Problem p;
    p.sys     = test::random_system(r, L1, L2, d, rng);
    auto pts  = generate_points(static_cast<std::size_t>(N), seed);
    p.P       = build_sampling_matrix(L1, L2, d, pts);
    p.y       = build_gradient_vector(synthesize_kernels(p.sys), pts);
    return p;
}

// Z built column by column from the linear map x -> P vec([[...]]), with no
// use of the structured Kronecker forms.
template <typename Embed>
CMatrix probe_matrix(const SamplingOperator& P, Index n, Embed embed)
{
    CMatrix Z(P.rows(), n);
    for (Index c = 0; c < n; ++c)
    {
        CVector e = CVector::Zero(n);
        e[c]      = 1.0;
        Z.col(c)  = P.apply(cpd_vector(embed(e)));
    }
    return Z;
}

CVector normal_equations(const CMatrix& Z, const CVector& y)
{
    const CMatrix G = Z.adjoint() * Z;
    return G.ldlt().solve(Z.adjoint() * y);
}

CVector flatten(const CMatrix& m)
{
    return Eigen::Map<const CVector>(m.data(), m.size());
}

} // namespace

TEST(PinvSolve, FullRankMatchesNormalEquations)
{
    std::mt19937_64 rng(1);
    const CMatrix Z = test::random_complex(12, 5, rng);
    const CVector y = test::random_complex(12, rng);
    const auto sol  = pinv_solve(Z, y, 1e-12);
    EXPECT_EQ(sol.rank, 5);
    EXPECT_LT((sol.x - normal_equations(Z, y)).norm(), 1e-12);
}

TEST(PinvSolve, RankDeficientGivesMinimumNorm)
{
    std::mt19937_64 rng(2);
    CMatrix Z = test::random_complex(8, 3, rng);
    Z.col(2)  = Z.col(0) + Z.col(1);
    const CVector y = test::random_complex(8, rng);
    const auto sol  = pinv_solve(Z, y, 1e-12);
    EXPECT_EQ(sol.rank, 2);
    // minimum norm: orthogonal to the null vector (1, 1, -1)
    const CVector nullv = (CVector(3) << 1, 1, -1).finished();
    EXPECT_LT(std::abs(nullv.dot(sol.x)), 1e-12);
}

TEST(Structure, ZMatricesMatchProbedMaps)
{
    std::mt19937_64 rng(3);
    const auto p  = exact_problem(2, 3, 2, 3, 3, 3);
    const auto& P = p.P;
    const Index r = 2, L1 = 3, L2 = 2, L3 = P.third_dim();
    const CMatrix A = test::random_complex(L1, r, rng);
    const CMatrix B = test::random_complex(L2, r, rng);
    const CMatrix H = test::random_complex(L3, r, rng);

    auto as = [](const CVector& e, Index rows, Index cols) {
        return CMatrix(Eigen::Map<const CMatrix>(e.data(), rows, cols));
    };
    const CMatrix ZA = probe_matrix(P, L1 * r, [&](const CVector& e) {
        return CPDFactors{as(e, L1, r), B, H};
    });
    const CMatrix ZB = probe_matrix(P, L2 * r, [&](const CVector& e) {
        return CPDFactors{A, as(e, L2, r), H};
    });
    const CMatrix ZH = probe_matrix(P, L3 * r, [&](const CVector& e) {
        return CPDFactors{A, B, as(e, L3, r)};
    });
    EXPECT_LT((z_matrix_A(P, B, H) - ZA).norm(), 1e-12 * ZA.norm());
    EXPECT_LT((z_matrix_B(P, A, H) - ZB).norm(), 1e-12 * ZB.norm());
    EXPECT_LT((z_matrix_H(P, A, B) - ZH).norm(), 1e-12 * ZH.norm());
}

TEST(BlockUpdates, MatchDenseNormalEquations)
{
    std::mt19937_64 rng(4);
    // d = 2, N = 4: L3 = 5, so every block has at most 10 unknowns
    const auto p  = exact_problem(2, 3, 3, 2, 4, 4);
    const auto& P = p.P;
    const CVector y = p.y + 0.1 * test::random_complex(P.rows(), rng);
    const CMatrix A = test::random_complex(3, 2, rng);
    const CMatrix B = test::random_complex(3, 2, rng);
    const CMatrix H = test::random_complex(P.third_dim(), 2, rng);

    const auto uA = als_update_A(P, y, B, H);
    const auto uB = als_update_B(P, y, A, H);
    const auto uH = als_update_H(P, y, A, B);
    const CVector xA = normal_equations(z_matrix_A(P, B, H), y);
    const CVector xB = normal_equations(z_matrix_B(P, A, H), y);
    const CVector xH = normal_equations(z_matrix_H(P, A, B), y);
    EXPECT_LT((flatten(uA.factor) - xA).norm(), 1e-10 * xA.norm());
    EXPECT_LT((flatten(uB.factor) - xB).norm(), 1e-10 * xB.norm());
    EXPECT_LT((flatten(uH.factor) - xH).norm(), 1e-10 * xH.norm());
    EXPECT_NEAR(uH.residual, (z_matrix_H(P, A, B) * xH - y).norm(), 1e-10);
}

TEST(BlockUpdates, ZeroDataGivesZeroFactor)
{
    std::mt19937_64 rng(5);
    const auto p = exact_problem(1, 2, 2, 2, 3, 5);
    const CVector y = CVector::Zero(p.P.rows());
    const auto up   = als_update_A(p.P, y, test::random_complex(2, 1, rng),
                                   test::random_complex(p.P.third_dim(), 1, rng));
    EXPECT_EQ(up.factor.norm(), 0.0);
}

TEST(BlockUpdates, ShapeErrors)
{
    const auto p = exact_problem(1, 2, 2, 2, 3, 6);
    EXPECT_THROW(als_update_A(p.P, CVector::Zero(3), CMatrix::Ones(2, 1),
                              CMatrix::Ones(p.P.third_dim(), 1)),
                 SizeError);
    EXPECT_THROW(als_update_B(p.P, p.y, CMatrix::Ones(2, 1), CMatrix::Ones(2, 1)),
                 SizeError);
}

TEST(Normalize, PreservesTensor)
{
    std::mt19937_64 rng(7);
    CPDFactors f{test::random_complex(3, 2, rng), test::random_complex(2, 2, rng),
                 test::random_complex(4, 2, rng)};
    const CVector before = cpd_vector(f);
    normalize_factors(f);
    EXPECT_LT((cpd_vector(f) - before).norm(), 1e-13 * before.norm());
    for (Index l = 0; l < 2; ++l)
    {
        EXPECT_NEAR(f.A.col(l).norm(), 1.0, 1e-14);
        EXPECT_NEAR(f.B.col(l).norm(), 1.0, 1e-14);
    }
}

TEST(Als, BlockResidualsNeverIncrease)
{
    for (std::uint64_t seed = 0; seed < 4; ++seed)
    {
        const auto p = exact_problem(2, 3, 3, 3, 8, seed);
        ALSOptions opts;
        opts.max_cycles           = 40;
        opts.normalize_each_cycle = false;
        auto rng                  = restart_rng(seed, 0);
        const auto init = random_factors(3, 3, p.P.third_dim(), 2, rng);
        const auto run  = als_run(p.P, p.y, init, opts);
        double prev     = run.initial_residual;
        for (double r : run.block_residuals)
        {
            EXPECT_LE(r, prev + 1e-12 * std::max(1.0, prev));
            prev = r;
        }
    }
}

TEST(Als, NormalizationDoesNotChangeResiduals)
{
    const auto p = exact_problem(2, 3, 2, 3, 6, 8);
    ALSOptions a, b;
    a.max_cycles = b.max_cycles = 15;
    b.normalize_each_cycle      = false;
    auto r1 = restart_rng(1, 0), r2 = restart_rng(1, 0);
    const auto ra = als_run(p.P, p.y, random_factors(3, 2, p.P.third_dim(), 2, r1), a);
    const auto rb = als_run(p.P, p.y, random_factors(3, 2, p.P.third_dim(), 2, r2), b);
    ASSERT_EQ(ra.residual_history.size(), rb.residual_history.size());
    for (std::size_t c = 0; c < ra.residual_history.size(); ++c)
        EXPECT_NEAR(ra.residual_history[c], rb.residual_history[c],
                    1e-8 * (1 + rb.residual_history[c]));
}

TEST(Als, RankOneExactDataConverges)
{
    int converged = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed)
    {
        const auto p = exact_problem(1, 2, 3, 3, 8, 100 + seed);
        ALSOptions opts;
        opts.restarts = 1;
        opts.seed     = seed;
        const auto res = partial_als(p.P, p.y, 1, opts);
        converged += res.final_residual() < 1e-8 ? 1 : 0;
    }
    EXPECT_GE(converged, 8);
}

TEST(Als, ExactStartStaysExact)
{
    const auto p   = exact_problem(2, 3, 3, 3, 10, 9);
    const auto pts = p.P.points();
    ALSOptions opts;
    opts.max_cycles = 3;
    const auto run  = als_run(p.P, p.y, system_factors(p.sys, pts), opts);
    EXPECT_LT(run.initial_residual, 1e-12 * p.y.norm());
    EXPECT_LT(run.final_residual(), 1e-10 * p.y.norm());
    EXPECT_TRUE(run.converged);
}

TEST(Als, BestRestartAndDeterminism)
{
    const auto p = exact_problem(2, 3, 3, 3, 10, 10);
    ALSOptions opts;
    opts.restarts   = 4;
    opts.max_cycles = 60;
    opts.seed       = 3;
    const auto a    = partial_als(p.P, p.y, 2, opts);
    const auto b    = partial_als(p.P, p.y, 2, opts);
    ASSERT_EQ(a.runs.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i)
    {
        EXPECT_GE(a.runs[i].final_residual(), a.final_residual());
        EXPECT_EQ(a.runs[i].residual_history, b.runs[i].residual_history);
    }
    for (std::size_t i = 0; i < a.best_restart; ++i)
        EXPECT_GT(a.runs[i].final_residual(), a.final_residual());
    EXPECT_EQ(a.residual_history, a.runs[a.best_restart].residual_history);

    opts.parallel_restarts = true;
    const auto c           = partial_als(p.P, p.y, 2, opts);
    EXPECT_EQ(c.best_restart, a.best_restart);
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_EQ(c.runs[i].residual_history, a.runs[i].residual_history);
}

TEST(Als, RestartStreamsDiffer)
{
    auto a = restart_rng(5, 0), b = restart_rng(5, 1), c = restart_rng(5, 0);
    const auto x = a();
    EXPECT_NE(x, b());
    EXPECT_EQ(x, c());
}

TEST(Als, OptionValidation)
{
    const auto p = exact_problem(1, 2, 2, 2, 3, 11);
    ALSOptions bad;
    bad.restarts = 0;
    EXPECT_THROW(partial_als(p.P, p.y, 1, bad), std::invalid_argument);
    bad          = {};
    bad.pinv_cutoff = 0.0;
    EXPECT_THROW(partial_als(p.P, p.y, 1, bad), std::invalid_argument);
    EXPECT_THROW(partial_als(p.P, p.y, 0, ALSOptions{}), std::invalid_argument);
}
