///
/// \file tensor_core.hpp
///
/// Dense complex tensors in column-major layout, Khatri-Rao and Kronecker
/// products, and evaluation of three-way polyadic decompositions.
///
#ifndef PWHID_TENSOR_CORE_HPP
#define PWHID_TENSOR_CORE_HPP

#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/KroneckerProduct>

namespace pwhid
{

using Complex = std::complex<double>;
using Index   = Eigen::Index;

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Thrown when operand shapes are incompatible.
class SizeError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

///
/// ### Tensor
///
/// Order-N array of complex doubles stored in column-major order. The first
/// index varies fastest. An order-0 tensor holds exactly one scalar.
///
class Tensor
{
public:
    using Dims = std::vector<std::size_t>;

    Tensor() : m_data(1, Complex{}) {}

    explicit Tensor(Dims dims)
        : m_dims(std::move(dims)), m_data(product(m_dims), Complex{})
    {
    }

    Tensor(Dims dims, std::vector<Complex> data)
        : m_dims(std::move(dims)), m_data(std::move(data))
    {
        if (m_data.size() != product(m_dims))
        {
            throw SizeError("Tensor: data length " +
                            std::to_string(m_data.size()) +
                            " does not match the product of dims");
        }
    }

    static Tensor scalar(Complex value)
    {
        return Tensor({}, {value});
    }

    std::size_t order() const
    {
        return m_dims.size();
    }

    const Dims& dims() const
    {
        return m_dims;
    }

    std::size_t dim(std::size_t mode) const
    {
        return m_dims.at(mode);
    }

    std::size_t size() const
    {
        return m_data.size();
    }

    std::span<const Complex> data() const
    {
        return m_data;
    }

    std::span<Complex> data()
    {
        return m_data;
    }

    ///
    /// Column-major linear position of a (0-based) multi-index. This is the
    /// one place where the 1-based notation (i_1, ..., i_N) of the formulas
    /// meets storage: entry (i_1, ..., i_N) lives at
    /// (i_1 - 1) + dims[0] * ((i_2 - 1) + dims[1] * (...)).
    ///
    std::size_t linear_index(std::span<const std::size_t> idx) const
    {
        if (idx.size() != m_dims.size())
        {
            throw SizeError("Tensor: index arity does not match tensor order");
        }
        std::size_t pos    = 0;
        std::size_t stride = 1;
        for (std::size_t k = 0; k < idx.size(); ++k)
        {
            if (idx[k] >= m_dims[k])
            {
                throw std::out_of_range("Tensor: index out of range");
            }
            pos += idx[k] * stride;
            stride *= m_dims[k];
        }
        return pos;
    }

    Complex operator()(std::span<const std::size_t> idx) const
    {
        return m_data[linear_index(idx)];
    }

    Complex& operator()(std::span<const std::size_t> idx)
    {
        return m_data[linear_index(idx)];
    }

    template <typename... Ix>
        requires(std::is_integral_v<Ix> && ...)
    Complex at(Ix... ix) const
    {
        const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
        return (*this)(std::span<const std::size_t>(idx, sizeof...(Ix)));
    }

    template <typename... Ix>
        requires(std::is_integral_v<Ix> && ...)
    Complex& at(Ix... ix)
    {
        const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
        return (*this)(std::span<const std::size_t>(idx, sizeof...(Ix)));
    }

    Tensor& operator+=(const Tensor& other)
    {
        if (other.m_dims != m_dims)
        {
            throw SizeError("Tensor: dims mismatch in addition");
        }
        for (std::size_t k = 0; k < m_data.size(); ++k)
        {
            m_data[k] += other.m_data[k];
        }
        return *this;
    }

    Tensor& operator*=(Complex alpha)
    {
        for (auto& x : m_data)
        {
            x *= alpha;
        }
        return *this;
    }

    friend Tensor operator+(Tensor lhs, const Tensor& rhs)
    {
        lhs += rhs;
        return lhs;
    }

    friend Tensor operator*(Complex alpha, Tensor t)
    {
        t *= alpha;
        return t;
    }

    static std::size_t product(const Dims& dims)
    {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                               std::multiplies<>());
    }

private:
    Dims m_dims;
    std::vector<Complex> m_data;
};

///
/// Contraction on one mode: the result drops `mode` and holds
/// sum_i t[..., i, ...] * v_i. Contracting the only mode of a vector gives
/// an order-0 tensor.
///
inline Tensor contract(const Tensor& t, std::size_t mode, const CVector& v)
{
    if (mode >= t.order())
    {
        throw SizeError("contract: mode " + std::to_string(mode) +
                        " out of range for order-" +
                        std::to_string(t.order()) + " tensor");
    }
    const std::size_t n = t.dim(mode);
    if (static_cast<std::size_t>(v.size()) != n)
    {
        throw SizeError("contract: vector length " + std::to_string(v.size()) +
                        " does not match dimension " + std::to_string(n));
    }

    Tensor::Dims out_dims;
    std::size_t before = 1;
    std::size_t after  = 1;
    for (std::size_t k = 0; k < t.order(); ++k)
    {
        if (k == mode)
        {
            continue;
        }
        out_dims.push_back(t.dim(k));
        (k < mode ? before : after) *= t.dim(k);
    }

    Tensor out(std::move(out_dims));
    auto src = t.data();
    auto dst = out.data();
    for (std::size_t c = 0; c < after; ++c)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            const Complex vi = v[static_cast<Index>(i)];
            const std::size_t base = before * (i + n * c);
            for (std::size_t a = 0; a < before; ++a)
            {
                dst[a + before * c] += src[base + a] * vi;
            }
        }
    }
    return out;
}

/// Column-major vectorization.
inline CVector vectorize(const Tensor& t)
{
    auto d = t.data();
    return Eigen::Map<const CVector>(d.data(), static_cast<Index>(d.size()));
}

/// Inverse of vectorize for the given dims.
inline Tensor reshape(const CVector& v, Tensor::Dims dims)
{
    return Tensor(std::move(dims), std::vector<Complex>(v.data(), v.data() + v.size()));
}

template <typename DerivedA, typename DerivedB>
auto kronecker(const Eigen::MatrixBase<DerivedA>& a,
               const Eigen::MatrixBase<DerivedB>& b)
{
    using Scalar = typename DerivedA::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
        Eigen::kroneckerProduct(a.eval(), b.eval());
    return out;
}

///
/// Column-wise Khatri-Rao product: column l of the result is
/// kron(a_l, b_l).
///
template <typename DerivedA, typename DerivedB>
auto khatri_rao(const Eigen::MatrixBase<DerivedA>& a,
                const Eigen::MatrixBase<DerivedB>& b)
{
    using Scalar = typename DerivedA::Scalar;
    if (a.cols() != b.cols())
    {
        throw SizeError("khatri_rao: column counts differ (" +
                        std::to_string(a.cols()) + " vs " +
                        std::to_string(b.cols()) + ")");
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(
        a.rows() * b.rows(), a.cols());
    for (Index l = 0; l < a.cols(); ++l)
    {
        for (Index i = 0; i < a.rows(); ++i)
        {
            out.col(l).segment(i * b.rows(), b.rows()) = a(i, l) * b.col(l);
        }
    }
    return out;
}

///
/// ### CPDFactors
///
/// Factor matrices of a three-way polyadic decomposition [[A, B, H]]. All
/// three share the column count r.
///
struct CPDFactors
{
    CMatrix A;
    CMatrix B;
    CMatrix H;

    Index rank() const
    {
        return A.cols();
    }

    Tensor::Dims dims() const
    {
        return {static_cast<std::size_t>(A.rows()),
                static_cast<std::size_t>(B.rows()),
                static_cast<std::size_t>(H.rows())};
    }

    void validate() const
    {
        if (B.cols() != A.cols() || H.cols() != A.cols())
        {
            throw SizeError("CPDFactors: factor matrices have differing "
                            "column counts");
        }
    }
};

/// vec([[A, B, H]]) = sum_l kron(h_l, kron(b_l, a_l)).
inline CVector cpd_vector(const CPDFactors& f)
{
    f.validate();
    const Index n1 = f.A.rows();
    const Index n2 = f.B.rows();
    const Index n3 = f.H.rows();
    CVector out = CVector::Zero(n1 * n2 * n3);
    for (Index l = 0; l < f.rank(); ++l)
    {
        for (Index k = 0; k < n3; ++k)
        {
            for (Index j = 0; j < n2; ++j)
            {
                const Complex bh = f.B(j, l) * f.H(k, l);
                out.segment(n1 * (j + n2 * k), n1) += bh * f.A.col(l);
            }
        }
    }
    return out;
}

inline Tensor cpd_eval(const CPDFactors& f)
{
    return reshape(cpd_vector(f), f.dims());
}

} // namespace pwhid

#endif /* PWHID_TENSOR_CORE_HPP */
