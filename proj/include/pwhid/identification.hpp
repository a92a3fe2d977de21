///
/// \file identification.hpp
///
/// End-to-end identification of a parallel Wiener-Hammerstein system from
/// its Volterra kernels: sampling points, gradient vector, partial ALS,
/// realization of the filters and recovery of the polynomial nonlinearities.
///
#ifndef PWHID_IDENTIFICATION_HPP
#define PWHID_IDENTIFICATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/QR>

#include <pwhid/recovery.hpp>
#include <pwhid/sampling.hpp>
#include <pwhid/volterra.hpp>

namespace pwhid
{

//-----------------------------------------------------------------------------
// Filter realization
//-----------------------------------------------------------------------------

struct RealizedFilters
{
    RMatrix A;
    RMatrix B;
    /// Per branch, the product of the A and B pivots. Folding it into H
    /// keeps the tensor: [[A, B, H]] = [[A_c, B_c, H diag(scale)]] where A_c
    /// and B_c are the complex columns after pivot division.
    CVector scale;
    /// Largest |imag| discarded from the pivot-normalized columns.
    double max_imag = 0.0;
    std::vector<bool> unreliable;
};

namespace detail
{

/// Returns the pivot of a column: its first entry, or the largest-modulus
/// entry when the first one is negligible. Zero marks an unusable column.
inline Complex column_pivot(const CVector& col)
{
    const double norm = col.norm();
    if (!(norm > 0.0))
    {
        return 0.0;
    }
    if (std::abs(col[0]) > 1e-8 * norm)
    {
        return col[0];
    }
    Index imax = 0;
    col.cwiseAbs().maxCoeff(&imax);
    return col[imax];
}

} // namespace detail

///
/// Divides each column of A and B by its pivot entry (the first row, or the
/// largest-modulus entry if the first is negligible) and keeps the real
/// parts. Real filters that already have a unit pivot come back unchanged;
/// a columnwise phase factor on the input is removed exactly.
///
inline RealizedFilters realize_filters(const CPDFactors& f)
{
    f.validate();
    const Index r = f.rank();
    RealizedFilters out;
    out.A = RMatrix::Zero(f.A.rows(), r);
    out.B = RMatrix::Zero(f.B.rows(), r);
    out.scale.setOnes(r);
    out.unreliable.assign(static_cast<std::size_t>(r), false);

    for (Index l = 0; l < r; ++l)
    {
        const CVector a  = f.A.col(l);
        const CVector b  = f.B.col(l);
        const Complex pa = detail::column_pivot(a);
        const Complex pb = detail::column_pivot(b);
        if (pa == 0.0 || pb == 0.0)
        {
            out.unreliable[static_cast<std::size_t>(l)] = true;
            continue;
        }
        const CVector an = a / pa;
        const CVector bn = b / pb;
        out.A.col(l)     = an.real();
        out.B.col(l)     = bn.real();
        out.scale[l]     = pa * pb;
        out.max_imag     = std::max({out.max_imag, an.imag().cwiseAbs().maxCoeff(),
                                     bn.imag().cwiseAbs().maxCoeff()});
    }
    return out;
}

//-----------------------------------------------------------------------------
// Branch scaling
//-----------------------------------------------------------------------------

///
/// a_l -> alpha a_l, b_l -> beta b_l with the compensating change
/// c_{l,s} -> c_{l,s} / (beta alpha^s) and const0_l -> const0_l / beta, which
/// leaves the input-output map unchanged.
///
inline void scale_branch(PWHSystem& sys, Index l, double alpha, double beta)
{
    sys.A.col(l) *= alpha;
    sys.B.col(l) *= beta;
    double p = beta;
    for (Index s = 1; s <= sys.degree(); ++s)
    {
        p *= alpha;
        sys.C(s - 1, l) /= p;
    }
    if (sys.const0.size() != 0)
    {
        sys.const0[l] /= beta;
    }
}

namespace detail
{

/// Sign of the first entry that is not negligible relative to the norm.
inline double leading_sign(const RVector& v)
{
    const double norm = v.norm();
    for (Index i = 0; i < v.size(); ++i)
    {
        if (std::abs(v[i]) > 1e-12 * norm)
        {
            return v[i] > 0.0 ? 1.0 : -1.0;
        }
    }
    return 1.0;
}

} // namespace detail

/// Unit-norm a_l and b_l with positive first nonzero entry; scale goes to c.
inline void normalize_branches(PWHSystem& sys)
{
    for (Index l = 0; l < sys.rank(); ++l)
    {
        const double na = sys.A.col(l).norm();
        const double nb = sys.B.col(l).norm();
        if (na == 0.0 || nb == 0.0)
        {
            continue;
        }
        scale_branch(sys, l, detail::leading_sign(sys.A.col(l)) / na,
                     detail::leading_sign(sys.B.col(l)) / nb);
    }
}

//-----------------------------------------------------------------------------
// Nonlinearity recovery
//-----------------------------------------------------------------------------

struct NonlinearityEstimate
{
    CVector coeffs; ///< c_1..c_d
    std::vector<bool> identifiable;
};

///
/// Least-squares fit of h ~ (c_1, 2 c_2 a(mu_1), ..., d c_d a(mu_N)^{d-1}).
/// Every c_s owns a disjoint group of rows, so the problem splits per degree.
/// Points with |a(mu_k)| <= 1e-10 max_k |a(mu_k)| carry no information and
/// are dropped; a degree left without rows is flagged unidentifiable.
///
inline NonlinearityEstimate recover_nonlinearity(const CVector& h,
                                                 const CVector& a,
                                                 const OperatingPoints& pts,
                                                 Index d)
{
    const Index N = pts.size();
    if (d < 1 || h.size() != 1 + N * (d - 1))
    {
        throw SizeError("recover_nonlinearity: h length " +
                        std::to_string(h.size()) + " != 1 + N(d - 1)");
    }
    NonlinearityEstimate est;
    est.coeffs = CVector::Zero(d);
    est.identifiable.assign(static_cast<std::size_t>(d), true);
    est.coeffs[0] = h[0];

    CVector a_mu(N);
    for (Index k = 0; k < N; ++k)
    {
        a_mu[k] = transfer_value(a, pts.mus[static_cast<std::size_t>(k)]);
    }
    const double floor = 1e-10 * (N > 0 ? a_mu.cwiseAbs().maxCoeff() : 0.0);

    for (Index s = 2; s <= d; ++s)
    {
        Complex num = 0.0;
        double den  = 0.0;
        for (Index k = 0; k < N; ++k)
        {
            if (!(std::abs(a_mu[k]) > floor))
            {
                continue;
            }
            const Complex w = static_cast<double>(s) * integer_power(a_mu[k], s - 1);
            num += std::conj(w) * h[1 + (s - 2) * N + k];
            den += std::norm(w);
        }
        if (den > 0.0)
        {
            est.coeffs[s - 1] = num / den;
        }
        else
        {
            est.identifiable[static_cast<std::size_t>(s - 1)] = false;
        }
    }
    return est;
}

struct DerivativeSample
{
    Complex x;     ///< a(mu_k) from the supplied filter
    Complex value; ///< g'(a(mu_k)) when h follows the model
};

///
/// Combines the entries of h that belong to one point:
/// h_1 + h_{2,k} + ... + h_{d,k} = c_1 + 2 c_2 a(mu_k) + ... = g'(a(mu_k)).
///
inline std::vector<DerivativeSample>
derivative_samples(const CVector& h, const CVector& a,
                   const OperatingPoints& pts, Index d)
{
    const Index N = pts.size();
    if (d < 1 || h.size() != 1 + N * (d - 1))
    {
        throw SizeError("derivative_samples: h length " +
                        std::to_string(h.size()) + " != 1 + N(d - 1)");
    }
    std::vector<DerivativeSample> out;
    out.reserve(static_cast<std::size_t>(N));
    for (Index k = 0; k < N; ++k)
    {
        const Complex mu = pts.mus[static_cast<std::size_t>(k)];
        Complex value    = h[0];
        for (Index s = 2; s <= d; ++s)
        {
            value += h[1 + (s - 2) * N + k];
        }
        out.push_back({transfer_value(a, mu), value});
    }
    return out;
}

/// Least-squares polynomial fit, coefficients in ascending powers.
inline CVector polynomial_regression(const std::vector<DerivativeSample>& samples,
                                     Index degree)
{
    const auto n = static_cast<Index>(samples.size());
    if (degree < 0 || n < degree + 1)
    {
        throw std::invalid_argument(
            "polynomial_regression: need at least degree + 1 samples");
    }
    CMatrix V(n, degree + 1);
    CVector rhs(n);
    for (Index k = 0; k < n; ++k)
    {
        const auto& smp = samples[static_cast<std::size_t>(k)];
        Complex p       = 1.0;
        for (Index j = 0; j <= degree; ++j)
        {
            V(k, j) = p;
            p *= smp.x;
        }
        rhs[k] = smp.value;
    }
    return V.colPivHouseholderQr().solve(rhs);
}

/// Real parts divided by the real part of the highest coefficient.
inline RVector monic_real(const CVector& coeffs)
{
    RVector re = coeffs.real();
    if (re.size() > 0 && re[re.size() - 1] != 0.0)
    {
        re /= re[re.size() - 1];
    }
    return re;
}

//-----------------------------------------------------------------------------
// Alignment with a reference system
//-----------------------------------------------------------------------------

///
/// Alignment of an estimate to a reference. Reference branch l corresponds
/// to estimated branch permutation[l], scaled by (a_scale[l], b_scale[l]).
/// Errors are relative 2-norm errors after alignment, with the estimated
/// polynomial coefficients compensated by c_s / (beta alpha^s).
///
struct FactorMatch
{
    std::vector<Index> permutation;
    RVector a_scale;
    RVector b_scale;
    RVector a_error;
    RVector b_error;
    RVector c_error;

    double max_filter_error() const
    {
        return std::max(a_error.maxCoeff(), b_error.maxCoeff());
    }
};

namespace detail
{

struct ColumnFit
{
    double scale = 0.0;
    double error = std::numeric_limits<double>::infinity();
};

/// Best real scale s for |s x - ref| and the resulting relative error.
inline ColumnFit fit_column(const RVector& x, const RVector& ref)
{
    const double xx = x.squaredNorm();
    ColumnFit fit;
    if (xx == 0.0)
    {
        return fit;
    }
    fit.scale = x.dot(ref) / xx;
    fit.error = (fit.scale * x - ref).norm() / std::max(ref.norm(), 1e-300);
    return fit;
}

} // namespace detail

inline FactorMatch match_factors(const PWHSystem& est, const PWHSystem& truth)
{
    const Index r = truth.rank();
    if (est.rank() != r || est.front_length() != truth.front_length() ||
        est.back_length() != truth.back_length())
    {
        throw SizeError("match_factors: (r, L1, L2) differ");
    }

    RMatrix cost(r, r);
    for (Index t = 0; t < r; ++t)
    {
        for (Index e = 0; e < r; ++e)
        {
            cost(t, e) = detail::fit_column(est.A.col(e), truth.A.col(t)).error +
                         detail::fit_column(est.B.col(e), truth.B.col(t)).error;
        }
    }

    std::vector<Index> perm(static_cast<std::size_t>(r));
    std::iota(perm.begin(), perm.end(), Index{0});
    if (r <= 4)
    {
        std::vector<Index> trial = perm;
        double best = std::numeric_limits<double>::infinity();
        do
        {
            double total = 0.0;
            for (Index t = 0; t < r; ++t)
            {
                total += cost(t, trial[static_cast<std::size_t>(t)]);
            }
            if (total < best)
            {
                best = total;
                perm = trial;
            }
        } while (std::next_permutation(trial.begin(), trial.end()));
    }
    else
    {
        std::vector<bool> used_t(static_cast<std::size_t>(r), false);
        std::vector<bool> used_e(static_cast<std::size_t>(r), false);
        for (Index step = 0; step < r; ++step)
        {
            Index bt = -1, be = -1;
            double bc = std::numeric_limits<double>::infinity();
            for (Index t = 0; t < r; ++t)
                for (Index e = 0; e < r; ++e)
                {
                    if (!used_t[static_cast<std::size_t>(t)] &&
                        !used_e[static_cast<std::size_t>(e)] &&
                        (bt < 0 || cost(t, e) < bc))
                    {
                        bc = cost(t, e);
                        bt = t;
                        be = e;
                    }
                }
            used_t[static_cast<std::size_t>(bt)] = true;
            used_e[static_cast<std::size_t>(be)] = true;
            perm[static_cast<std::size_t>(bt)]   = be;
        }
    }

    FactorMatch m;
    m.permutation = perm;
    m.a_scale.resize(r);
    m.b_scale.resize(r);
    m.a_error.resize(r);
    m.b_error.resize(r);
    m.c_error.resize(r);
    for (Index t = 0; t < r; ++t)
    {
        const Index e  = perm[static_cast<std::size_t>(t)];
        const auto fa  = detail::fit_column(est.A.col(e), truth.A.col(t));
        const auto fb  = detail::fit_column(est.B.col(e), truth.B.col(t));
        m.a_scale[t]   = fa.scale;
        m.b_scale[t]   = fb.scale;
        m.a_error[t]   = fa.error;
        m.b_error[t]   = fb.error;

        RVector c(est.degree());
        double p = fb.scale;
        for (Index s = 1; s <= est.degree(); ++s)
        {
            p *= fa.scale;
            c[s - 1] = p != 0.0 ? est.C(s - 1, e) / p
                                : std::numeric_limits<double>::infinity();
        }
        const Index dmin = std::min(est.degree(), truth.degree());
        m.c_error[t] = (c.head(dmin) - truth.C.col(t).head(dmin)).norm() /
                       std::max(truth.C.col(t).norm(), 1e-300);
    }
    return m;
}

/// The estimate with branches permuted and rescaled onto the reference.
inline PWHSystem apply_alignment(const PWHSystem& est, const FactorMatch& m)
{
    PWHSystem out = est;
    for (Index t = 0; t < est.rank(); ++t)
    {
        const Index e = m.permutation[static_cast<std::size_t>(t)];
        out.A.col(t)  = est.A.col(e);
        out.B.col(t)  = est.B.col(e);
        out.C.col(t)  = est.C.col(e);
        if (est.const0.size() != 0)
        {
            out.const0[t] = est.const0[e];
        }
        scale_branch(out, t, m.a_scale[t], m.b_scale[t]);
    }
    return out;
}

//-----------------------------------------------------------------------------
// Overall identification
//-----------------------------------------------------------------------------

struct IdentificationOptions
{
    std::uint64_t point_seed = 0;
    ALSOptions als;
};

struct IdentificationReport
{
    OperatingPoints points;
    Index measurements = 0; ///< rows of P
    Index unknowns     = 0; ///< r (L1 + L2 + L3)

    ALSResult als;
    CPDFactors raw; ///< best-run factors as returned by ALS

    /// Real estimate under the unit-norm branch convention; const0 is zero.
    PWHSystem estimate;
    /// Third factor matching `estimate`: [[A, B, H]] equals the raw tensor.
    CMatrix nonlinearity_factor;

    double max_filter_imag = 0.0; ///< discarded by realize_filters
    double max_coeff_imag  = 0.0; ///< discarded from recovered c
    std::vector<bool> unreliable_branch;
    std::vector<std::vector<bool>> coeff_identifiable;

    /// Per branch: monic real fit of g' from derivative samples, ascending.
    std::vector<RVector> derivative_polynomials;

    std::optional<FactorMatch> match;

    bool flagged() const
    {
        return !als.converged ||
               std::any_of(unreliable_branch.begin(), unreliable_branch.end(),
                           [](bool b) { return b; });
    }
};

///
/// Runs the full pipeline. With a reference system the report also carries
/// the aligned errors. ALS stagnation is reported through `flagged()`, not
/// thrown.
///
inline IdentificationReport
identify(const VolterraKernelSet& k, Index r, Index L1, Index L2, Index N,
         const IdentificationOptions& opts,
         const std::optional<PWHSystem>& truth = std::nullopt)
{
    k.validate();
    if (k.memory_length() != L1 + L2 - 1)
    {
        throw SizeError("identify: kernel dimension " +
                        std::to_string(k.memory_length()) +
                        " != L1 + L2 - 1 = " + std::to_string(L1 + L2 - 1));
    }
    if (r < 1 || N < 1)
    {
        throw std::invalid_argument("identify: r and N must be at least 1");
    }
    const Index d = k.degree();

    IdentificationReport rep;
    rep.points = generate_points(static_cast<std::size_t>(N), opts.point_seed);
    const auto P = build_sampling_matrix(L1, L2, d, rep.points);
    const CVector y = build_gradient_vector(k, rep.points);
    rep.measurements = P.rows();
    rep.unknowns     = r * (L1 + L2 + P.third_dim());

    rep.als = partial_als(P, y, r, opts.als);
    rep.raw = rep.als.factors;

    const auto real = realize_filters(rep.raw);
    rep.max_filter_imag   = real.max_imag;
    rep.unreliable_branch = real.unreliable;

    PWHSystem est;
    est.A      = real.A;
    est.B      = real.B;
    est.C      = RMatrix::Zero(d, r);
    est.const0 = RVector::Zero(r);
    CMatrix H  = rep.raw.H * real.scale.asDiagonal();

    for (Index l = 0; l < r; ++l)
    {
        if (real.unreliable[static_cast<std::size_t>(l)])
        {
            rep.coeff_identifiable.emplace_back(static_cast<std::size_t>(d), false);
            rep.derivative_polynomials.emplace_back(RVector::Zero(d));
            continue;
        }
        const double na    = est.A.col(l).norm();
        const double nb    = est.B.col(l).norm();
        const double alpha = detail::leading_sign(est.A.col(l)) / na;
        const double beta  = detail::leading_sign(est.B.col(l)) / nb;
        est.A.col(l) *= alpha;
        est.B.col(l) *= beta;
        H.col(l) /= alpha * beta;

        const CVector a = est.A.col(l).cast<Complex>();
        const auto nl   = recover_nonlinearity(H.col(l), a, rep.points, d);
        est.C.col(l)    = nl.coeffs.real();
        rep.max_coeff_imag =
            std::max(rep.max_coeff_imag, nl.coeffs.imag().cwiseAbs().maxCoeff());
        rep.coeff_identifiable.push_back(nl.identifiable);

        if (d >= 2)
        {
            const auto samples = derivative_samples(H.col(l), a, rep.points, d);
            rep.derivative_polynomials.push_back(
                monic_real(polynomial_regression(samples, d - 1)));
        }
        else
        {
            rep.derivative_polynomials.push_back(RVector::Constant(1, 1.0));
        }
    }
    rep.estimate            = std::move(est);
    rep.nonlinearity_factor = std::move(H);

    if (truth)
    {
        rep.match = match_factors(rep.estimate, *truth);
    }
    return rep;
}

} // namespace pwhid

#endif /* PWHID_IDENTIFICATION_HPP */
