///
/// \file volterra.hpp
///
/// Parallel Wiener-Hammerstein systems with FIR blocks and polynomial static
/// nonlinearities, and their truncated Volterra kernels.
///
#ifndef PWHID_VOLTERRA_HPP
#define PWHID_VOLTERRA_HPP

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <pwhid/tensor_core.hpp>

namespace pwhid
{

///
/// ### PWHSystem
///
/// Branch l maps the input through the front filter `A.col(l)`, the
/// polynomial g_l(x) = const0[l] + sum_s C(s-1, l) x^s and the back filter
/// `B.col(l)`; the branch outputs are summed.
///
/// Convolution follows (a * x)(t) = sum_i x(t - i + 1) a_i, so the output at
/// time t depends on the L = L1 + L2 - 1 most recent inputs.
///
struct PWHSystem
{
    RMatrix A;      ///< L1 x r front filters.
    RMatrix B;      ///< L2 x r back filters.
    RMatrix C;      ///< d x r, entry (s-1, l) is the coefficient of x^s in g_l.
    RVector const0; ///< Constant term of each g_l; empty means all zero.

    Index rank() const
    {
        return A.cols();
    }
    Index front_length() const
    {
        return A.rows();
    }
    Index back_length() const
    {
        return B.rows();
    }
    Index degree() const
    {
        return C.rows();
    }
    Index memory_length() const
    {
        return A.rows() + B.rows() - 1;
    }

    double constant(Index l) const
    {
        return const0.size() == 0 ? 0.0 : const0[l];
    }

    void validate() const
    {
        if (A.rows() < 1 || B.rows() < 1 || C.rows() < 1 || A.cols() < 1)
        {
            throw std::invalid_argument(
                "PWHSystem: L1, L2, d and r must all be at least 1");
        }
        if (B.cols() != A.cols() || C.cols() != A.cols())
        {
            throw SizeError("PWHSystem: A, B and C must have r columns each");
        }
        if (const0.size() != 0 && const0.size() != A.cols())
        {
            throw SizeError("PWHSystem: const0 must have one entry per branch");
        }
        for (Index l = 0; l < A.cols(); ++l)
        {
            if (A.col(l).isZero(0.0) || B.col(l).isZero(0.0))
            {
                throw std::invalid_argument("PWHSystem: branch " +
                                            std::to_string(l + 1) +
                                            " has an all-zero filter");
            }
        }
    }
};

///
/// ### VolterraKernelSet
///
/// `kernels[s-1]` is the symmetric order-s kernel of dimension L per mode.
///
struct VolterraKernelSet
{
    std::vector<Tensor> kernels;
    double f0 = 0.0;

    Index degree() const
    {
        return static_cast<Index>(kernels.size());
    }

    Index memory_length() const
    {
        return kernels.empty() ? 0 : static_cast<Index>(kernels.front().dim(0));
    }

    const Tensor& kernel(Index s) const
    {
        return kernels.at(static_cast<std::size_t>(s - 1));
    }

    void validate() const
    {
        if (kernels.empty())
        {
            throw std::invalid_argument("VolterraKernelSet: no kernels");
        }
        const std::size_t L = kernels.front().order() == 1
                                  ? kernels.front().dim(0)
                                  : 0;
        for (std::size_t s = 1; s <= kernels.size(); ++s)
        {
            const Tensor& h = kernels[s - 1];
            if (h.order() != s)
            {
                throw SizeError("VolterraKernelSet: kernel " +
                                std::to_string(s) + " has order " +
                                std::to_string(h.order()));
            }
            for (auto n : h.dims())
            {
                if (n != L)
                {
                    throw SizeError(
                        "VolterraKernelSet: kernel dims must all equal L");
                }
            }
        }
    }
};

struct SimulationResult
{
    std::vector<double> output;
    /// Leading samples computed against the zero-padded input history.
    std::size_t transient = 0;
    /// True when the input is shorter than L, so no sample is steady-state.
    bool transient_only = false;
};

///
/// Time-domain response y = sum_l b_l * g_l(a_l * u). The input is taken as
/// zero before its first sample with the system at rest, meaning the
/// nonlinearity outputs g_l(0) there. The first L - 1 samples are flagged
/// transient.
///
inline SimulationResult simulate(const PWHSystem& sys,
                                 std::span<const double> input)
{
    sys.validate();
    if (input.empty())
    {
        throw std::invalid_argument("simulate: empty input");
    }
    const Index T  = static_cast<Index>(input.size());
    const Index L1 = sys.front_length();
    const Index L2 = sys.back_length();
    const Index L  = sys.memory_length();

    SimulationResult res;
    res.output.assign(input.size(), 0.0);
    res.transient      = static_cast<std::size_t>(std::min(L - 1, T));
    res.transient_only = T < L;

    std::vector<double> z(input.size());
    for (Index l = 0; l < sys.rank(); ++l)
    {
        // z(t) = g_l((a_l * u)(t)); Horner on the coefficient column
        for (Index t = 0; t < T; ++t)
        {
            double x = 0.0;
            for (Index i = 0; i < L1 && i <= t; ++i)
            {
                x += input[static_cast<std::size_t>(t - i)] * sys.A(i, l);
            }
            double g = 0.0;
            for (Index s = sys.degree(); s >= 1; --s)
            {
                g = (g + sys.C(s - 1, l)) * x;
            }
            z[static_cast<std::size_t>(t)] = g + sys.constant(l);
        }
        const double z_rest = sys.constant(l);
        for (Index t = 0; t < T; ++t)
        {
            double y = 0.0;
            for (Index k = 0; k < L2; ++k)
            {
                y += (t - k >= 0 ? z[static_cast<std::size_t>(t - k)] : z_rest) *
                     sys.B(k, l);
            }
            res.output[static_cast<std::size_t>(t)] += y;
        }
    }
    return res;
}

/// Degree-s homogeneous term f^(s)(u) = H^(s) x_1 u x_2 u ... x_s u.
inline Complex evaluate_homogeneous(const VolterraKernelSet& k, Index s,
                                    const CVector& u)
{
    if (s < 1 || s > k.degree())
    {
        throw std::out_of_range("evaluate_homogeneous: degree " +
                                std::to_string(s) + " out of range");
    }
    if (u.size() != k.memory_length())
    {
        throw SizeError("evaluate_homogeneous: input length " +
                        std::to_string(u.size()) + " != L = " +
                        std::to_string(k.memory_length()));
    }
    Tensor t = k.kernel(s);
    while (t.order() > 0)
    {
        t = contract(t, t.order() - 1, u);
    }
    return t.data()[0];
}

/// f(u) = f0 + sum_s f^(s)(u), with u = (u(t), u(t-1), ..., u(t-L+1)).
inline Complex evaluate_kernel_output(const VolterraKernelSet& k,
                                      const CVector& u)
{
    if (u.size() != k.memory_length())
    {
        throw SizeError("evaluate_kernel_output: input length " +
                        std::to_string(u.size()) + " != L = " +
                        std::to_string(k.memory_length()));
    }
    Complex y = k.f0;
    for (Index s = 1; s <= k.degree(); ++s)
    {
        y += evaluate_homogeneous(k, s, u);
    }
    return y;
}

///
/// Kernels of a PWH system:
///
///   H^(s)[i_1..i_s] = sum_l c_{l,s} sum_k B[k,l] prod_j A~[i_j - k + 1, l]
///
/// where A~ is A zero-extended outside rows 1..L1. This is the monomial
/// expansion of b^T g(V^T u) with V the Toeplitz matrix of a, hence
/// symmetric.
///
inline VolterraKernelSet synthesize_kernels(const PWHSystem& sys)
{
    sys.validate();
    const Index L1 = sys.front_length();
    const Index L2 = sys.back_length();
    const auto L   = static_cast<std::size_t>(sys.memory_length());

    VolterraKernelSet out;
    out.f0 = 0.0;
    for (Index l = 0; l < sys.rank(); ++l)
    {
        out.f0 += sys.constant(l) * sys.B.col(l).sum();
    }

    for (Index s = 1; s <= sys.degree(); ++s)
    {
        Tensor h(Tensor::Dims(static_cast<std::size_t>(s), L));
        std::vector<std::size_t> idx(static_cast<std::size_t>(s), 0);
        for (auto& entry : h.data())
        {
            Complex acc = 0.0;
            for (Index l = 0; l < sys.rank(); ++l)
            {
                const double c = sys.C(s - 1, l);
                if (c == 0.0)
                {
                    continue;
                }
                double branch = 0.0;
                for (Index k = 0; k < L2; ++k)
                {
                    double prod = sys.B(k, l);
                    for (auto i : idx)
                    {
                        const Index m = static_cast<Index>(i) - k;
                        if (m < 0 || m >= L1)
                        {
                            prod = 0.0;
                            break;
                        }
                        prod *= sys.A(m, l);
                    }
                    branch += prod;
                }
                acc += c * branch;
            }
            entry = acc;

            // advance the column-major multi-index
            for (auto& i : idx)
            {
                if (++i < L)
                {
                    break;
                }
                i = 0;
            }
        }
        out.kernels.push_back(std::move(h));
    }
    return out;
}

///
/// Gradient of the degree-s homogeneous part:
/// s * (H^(s) x_2 u ... x_s u). For s = 1 this is H^(1) for every u.
///
inline CVector gradient_of_homogeneous(const VolterraKernelSet& k, Index s,
                                       const CVector& u)
{
    if (s < 1 || s > k.degree())
    {
        throw std::out_of_range("gradient_of_homogeneous: degree " +
                                std::to_string(s) + " not in [1, " +
                                std::to_string(k.degree()) + "]");
    }
    if (u.size() != k.memory_length())
    {
        throw SizeError("gradient_of_homogeneous: input length " +
                        std::to_string(u.size()) + " != L = " +
                        std::to_string(k.memory_length()));
    }
    Tensor t = k.kernel(s);
    // contract modes s, s-1, ..., 2; the last mode is the cheapest to drop
    while (t.order() > 1)
    {
        t = contract(t, t.order() - 1, u);
    }
    return static_cast<double>(s) * vectorize(t);
}

} // namespace pwhid

#endif /* PWHID_VOLTERRA_HPP */
