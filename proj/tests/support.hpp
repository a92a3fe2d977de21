// Shared helpers for the test suites.
#ifndef PWHID_TESTS_SUPPORT_HPP
#define PWHID_TESTS_SUPPORT_HPP

#include <random>

#include <pwhid/pwhid.hpp>

namespace pwhid::test
{

/// Random real system with filter taps and coefficients in [-1, 1].
inline PWHSystem random_system(Index r, Index L1, Index L2, Index d,
                               std::mt19937_64& rng, bool with_constants = true)
{
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    auto fill = [&](Index rows, Index cols) {
        RMatrix m(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i)
                m(i, j) = U(rng);
        return m;
    };
    PWHSystem sys;
    sys.A = fill(L1, r);
    sys.B = fill(L2, r);
    sys.C = fill(d, r);
    sys.const0 = with_constants ? RVector(fill(r, 1).col(0)) : RVector::Zero(r);
    return sys;
}

inline CVector random_complex(Index n, std::mt19937_64& rng)
{
    std::normal_distribution<double> N(0.0, 1.0);
    CVector v(n);
    for (Index i = 0; i < n; ++i)
    {
        const double re = N(rng);
        v[i]            = Complex(re, N(rng));
    }
    return v;
}

inline CMatrix random_complex(Index rows, Index cols, std::mt19937_64& rng)
{
    CMatrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        m.col(j) = random_complex(rows, rng);
    return m;
}

/// The two-branch cubic system used throughout the examples.
inline PWHSystem two_branch_cubic()
{
    PWHSystem sys;
    sys.A.resize(3, 2);
    sys.A << 0.3, 0.6, -0.4, 0.2, 0.1, 0.3;
    sys.B.resize(3, 2);
    sys.B << 0.3, 0.2, 0.2, 0.3, 0.1, 0.01;
    sys.C.resize(3, 2);
    sys.C << 0, 3, -1, 0, 3, -5;
    sys.const0.resize(2);
    sys.const0 << 5, -7;
    return sys;
}

} // namespace pwhid::test

#endif
