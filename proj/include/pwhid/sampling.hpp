///
/// \file sampling.hpp
///
/// Vandermonde operating points and the sampling operator that maps a
/// third-order tensor T (L1 x L2 x L3) to the stacked gradients of the
/// homogeneous parts of a Volterra model.
///
#ifndef PWHID_SAMPLING_HPP
#define PWHID_SAMPLING_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/SparseCore>

#include <pwhid/tensor_core.hpp>
#include <pwhid/volterra.hpp>

namespace pwhid
{

using SparseCMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor>;

///
/// ### OperatingPoints
///
/// Parameters mu_1..mu_N on the unit circle. The fixed point mu = 1 that
/// serves the degree-1 block is implicit and not stored here.
///
struct OperatingPoints
{
    std::vector<Complex> mus;

    Index size() const
    {
        return static_cast<Index>(mus.size());
    }
};

/// u_mu = (1, mu, mu^2, ..., mu^{L-1}).
inline CVector vandermonde_point(Complex mu, Index L)
{
    CVector u(L);
    Complex p = 1.0;
    for (Index i = 0; i < L; ++i)
    {
        u[i] = p;
        p *= mu;
    }
    return u;
}

/// z^n by repeated multiplication, n >= 0.
inline Complex integer_power(Complex z, Index n)
{
    Complex p = 1.0;
    for (Index i = 0; i < n; ++i)
    {
        p *= z;
    }
    return p;
}

/// a(mu) = a_1 + a_2 mu + ... + a_{L1} mu^{L1-1}, evaluated by Horner.
template <typename Derived>
Complex transfer_value(const Eigen::MatrixBase<Derived>& a, Complex mu)
{
    Complex acc = 0.0;
    for (Index i = a.size() - 1; i >= 0; --i)
    {
        acc = acc * mu + Complex(a(i));
    }
    return acc;
}

///
/// N points exp(i theta_k) with theta_k uniform on [0, 2 pi), drawn from a
/// mt19937_64 seeded with `seed`. A draw closer than 1e-9 to an earlier point
/// is discarded and redrawn.
///
inline OperatingPoints generate_points(std::size_t N, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    OperatingPoints pts;
    pts.mus.reserve(N);
    while (pts.mus.size() < N)
    {
        const Complex mu = std::polar(1.0, phase(rng));
        bool distinct    = true;
        for (const auto& other : pts.mus)
        {
            if (std::abs(mu - other) < 1e-9)
            {
                distinct = false;
                break;
            }
        }
        if (distinct)
        {
            pts.mus.push_back(mu);
        }
    }
    return pts;
}

///
/// Antidiagonal sums of an L1 x L2 matrix: out[m] = sum_{i + j = m} E(i, j)
/// with 0-based i, j. For E = a b^T this is the full convolution a * b.
///
inline CVector hankelize(const CMatrix& E)
{
    CVector out = CVector::Zero(E.rows() + E.cols() - 1);
    for (Index j = 0; j < E.cols(); ++j)
    {
        out.segment(j, E.rows()) += E.col(j);
    }
    return out;
}

/// hankelize(E * Diag(1, mu^{s-1}, ..., mu^{(L2-1)(s-1)})).
inline CVector project_slice(const CMatrix& E, Complex mu, Index s)
{
    if (s < 1)
    {
        throw std::invalid_argument("project_slice: degree must be >= 1");
    }
    const Complex step = integer_power(mu, s - 1);
    CVector out        = CVector::Zero(E.rows() + E.cols() - 1);
    Complex scale      = 1.0;
    for (Index j = 0; j < E.cols(); ++j)
    {
        out.segment(j, E.rows()) += scale * E.col(j);
        scale *= step;
    }
    return out;
}

///
/// ### SamplingOperator
///
/// Sparse matrix P of shape M x (L1 L2 L3) with M = ((d-1)N + 1) L and
/// L3 = 1 + N(d-1). Slice 0 of T is sampled with degree 1 at mu = 1; slices
/// 1 + (s-2)N + k (k = 0..N-1) are sampled with degree s at mu_{k+1}. P is
/// block diagonal, one L x (L1 L2) banded block per slice.
///
class SamplingOperator
{
public:
    struct Slice
    {
        Complex mu;
        Index degree;
        Index row_offset;
        Index col_offset;
    };

    SamplingOperator() = default;

    SamplingOperator(Index L1, Index L2, Index d, OperatingPoints pts)
        : m_L1(L1), m_L2(L2), m_d(d), m_points(std::move(pts))
    {
        if (L1 < 1 || L2 < 1 || d < 1)
        {
            throw std::invalid_argument(
                "SamplingOperator: L1, L2 and d must be at least 1");
        }
        if (d > 1 && m_points.size() < 1)
        {
            throw std::invalid_argument(
                "SamplingOperator: degree > 1 needs at least one point");
        }
        const Index L     = memory_length();
        const Index block = L1 * L2;

        m_slices.push_back({Complex(1.0), 1, 0, 0});
        for (Index s = 2; s <= d; ++s)
        {
            for (const auto& mu : m_points.mus)
            {
                const auto k = static_cast<Index>(m_slices.size());
                m_slices.push_back({mu, s, k * L, k * block});
            }
        }

        std::vector<Eigen::Triplet<Complex>> entries;
        entries.reserve(m_slices.size() * static_cast<std::size_t>(block));
        for (const auto& sl : m_slices)
        {
            const Complex step = integer_power(sl.mu, sl.degree - 1);
            Complex scale      = 1.0;
            for (Index j = 0; j < L2; ++j)
            {
                for (Index i = 0; i < L1; ++i)
                {
                    entries.emplace_back(sl.row_offset + i + j,
                                         sl.col_offset + i + L1 * j, scale);
                }
                scale *= step;
            }
        }
        m_matrix.resize(rows(), cols());
        m_matrix.setFromTriplets(entries.begin(), entries.end());
        m_matrix.makeCompressed();
    }

    Index front_length() const
    {
        return m_L1;
    }
    Index back_length() const
    {
        return m_L2;
    }
    Index degree() const
    {
        return m_d;
    }
    Index memory_length() const
    {
        return m_L1 + m_L2 - 1;
    }
    Index third_dim() const
    {
        return static_cast<Index>(m_slices.size());
    }
    Index rows() const
    {
        return third_dim() * memory_length();
    }
    Index cols() const
    {
        return m_L1 * m_L2 * third_dim();
    }

    const SparseCMatrix& matrix() const
    {
        return m_matrix;
    }
    const std::vector<Slice>& slices() const
    {
        return m_slices;
    }
    const OperatingPoints& points() const
    {
        return m_points;
    }

    /// P vec(T).
    CVector apply(const CVector& vec_t) const
    {
        if (vec_t.size() != cols())
        {
            throw SizeError("SamplingOperator::apply: vector length " +
                            std::to_string(vec_t.size()) + " != " +
                            std::to_string(cols()));
        }
        return m_matrix * vec_t;
    }

    /// Ratio of measurements to unknowns r (L1 + L2 + L3).
    double row_unknown_ratio(Index r) const
    {
        return static_cast<double>(rows()) /
               static_cast<double>(r * (m_L1 + m_L2 + third_dim()));
    }

private:
    Index m_L1 = 0;
    Index m_L2 = 0;
    Index m_d  = 0;
    OperatingPoints m_points;
    std::vector<Slice> m_slices;
    SparseCMatrix m_matrix;
};

inline SamplingOperator build_sampling_matrix(Index L1, Index L2, Index d,
                                              const OperatingPoints& pts)
{
    return SamplingOperator(L1, L2, d, pts);
}

///
/// Stacked gradient vector: grad f^(1)(u_1), then grad f^(s)(u_{mu_k}) for
/// s = 2..d and k = 1..N, each block of length L.
///
inline CVector build_gradient_vector(const VolterraKernelSet& k,
                                     const OperatingPoints& pts)
{
    k.validate();
    const Index L = k.memory_length();
    const Index d = k.degree();
    CVector y(((d - 1) * pts.size() + 1) * L);
    y.head(L) = gradient_of_homogeneous(k, 1, vandermonde_point(1.0, L));
    Index offset = L;
    for (Index s = 2; s <= d; ++s)
    {
        for (const auto& mu : pts.mus)
        {
            y.segment(offset, L) =
                gradient_of_homogeneous(k, s, vandermonde_point(mu, L));
            offset += L;
        }
    }
    return y;
}

///
/// Third factor of the rank-r tensor whose samples are the gradient vector:
/// column l is (c_1, 2 c_2 a_l(mu_1), ..., 2 c_2 a_l(mu_N), ...,
/// d c_d a_l(mu_N)^{d-1}).
///
inline CMatrix nonlinearity_factor(const PWHSystem& sys,
                                   const OperatingPoints& pts)
{
    const Index d = sys.degree();
    const Index N = pts.size();
    CMatrix H(1 + N * (d - 1), sys.rank());
    for (Index l = 0; l < sys.rank(); ++l)
    {
        H(0, l) = sys.C(0, l);
        for (Index k = 0; k < N; ++k)
        {
            const Complex a_mu = transfer_value(sys.A.col(l), pts.mus[static_cast<std::size_t>(k)]);
            Complex power      = a_mu;
            for (Index s = 2; s <= d; ++s)
            {
                H(1 + (s - 2) * N + k, l) = static_cast<double>(s) * sys.C(s - 1, l) * power;
                power *= a_mu;
            }
        }
    }
    return H;
}

/// Exact factors (A, B, H) of the sampled tensor for a known system.
inline CPDFactors system_factors(const PWHSystem& sys,
                                 const OperatingPoints& pts)
{
    return {sys.A.cast<Complex>(), sys.B.cast<Complex>(),
            nonlinearity_factor(sys, pts)};
}

} // namespace pwhid

#endif /* PWHID_SAMPLING_HPP */
