///
/// \file io.hpp
///
/// Plain-text formats: kernel sets, operating points, sampling-matrix
/// triplets and residual histories. Numbers are written in the shortest
/// form that reads back to the identical double.
///
#ifndef PWHID_IO_HPP
#define PWHID_IO_HPP

#include <cctype>
#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <pwhid/sampling.hpp>
#include <pwhid/volterra.hpp>

namespace pwhid
{

/// Malformed input; `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error
{
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                      : what),
          m_line(line)
    {
    }

    std::size_t line() const
    {
        return m_line;
    }

private:
    std::size_t m_line;
};

inline std::string format_double(double x)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace detail
{

class LineReader
{
public:
    explicit LineReader(std::istream& in) : m_in(in) {}

    /// Next non-empty line split on whitespace, or nothing at end of input.
    std::optional<std::vector<std::string_view>> try_next()
    {
        while (std::getline(m_in, m_line))
        {
            ++m_number;
            auto fields = split(m_line);
            if (!fields.empty())
            {
                return fields;
            }
        }
        return std::nullopt;
    }

    std::vector<std::string_view> next(const char* what)
    {
        if (auto f = try_next())
        {
            return *std::move(f);
        }
        throw ParseError(m_number + 1,
                         std::string("unexpected end of input, expected ") + what);
    }

    bool at_end()
    {
        while (m_in.peek() != std::char_traits<char>::eof())
        {
            std::string rest;
            std::getline(m_in, rest);
            ++m_number;
            if (!split(rest).empty())
            {
                return false;
            }
        }
        return true;
    }

    std::size_t line() const
    {
        return m_number;
    }

    double to_double(std::string_view s) const
    {
        double v = 0.0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        {
            throw ParseError(m_number, "not a number: '" + std::string(s) + "'");
        }
        return v;
    }

    long long to_integer(std::string_view s) const
    {
        long long v = 0;
        auto res    = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        {
            throw ParseError(m_number, "not an integer: '" + std::string(s) + "'");
        }
        return v;
    }

    void expect_fields(const std::vector<std::string_view>& f, std::size_t n,
                       const char* what) const
    {
        if (f.size() != n)
        {
            throw ParseError(m_number, std::string("expected ") + what);
        }
    }

private:
    static std::vector<std::string_view> split(std::string_view s)
    {
        std::vector<std::string_view> out;
        std::size_t i = 0;
        while (i < s.size())
        {
            while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
                ++i;
            std::size_t j = i;
            while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])))
                ++j;
            if (j > i)
                out.push_back(s.substr(i, j - i));
            i = j;
        }
        return out;
    }

    std::istream& m_in;
    std::string m_line;
    std::size_t m_number = 0;
};

} // namespace detail

//-----------------------------------------------------------------------------
// Kernel files
//
//   L d
//   f0
//   re im        one line per entry, kernel 1 .. d, column-major
//-----------------------------------------------------------------------------

inline void write_kernels(std::ostream& out, const VolterraKernelSet& k)
{
    k.validate();
    out << k.memory_length() << ' ' << k.degree() << '\n';
    out << format_double(k.f0) << '\n';
    for (const auto& h : k.kernels)
    {
        for (const auto& z : h.data())
        {
            out << format_double(z.real()) << ' ' << format_double(z.imag())
                << '\n';
        }
    }
}

inline VolterraKernelSet read_kernels(std::istream& in)
{
    detail::LineReader rd(in);
    auto head = rd.next("header 'L d'");
    rd.expect_fields(head, 2, "header 'L d'");
    const long long L = rd.to_integer(head[0]);
    const long long d = rd.to_integer(head[1]);
    if (L < 1 || d < 1)
    {
        throw ParseError(rd.line(), "L and d must be positive");
    }

    VolterraKernelSet k;
    auto f0 = rd.next("f0");
    rd.expect_fields(f0, 1, "a single f0 value");
    k.f0 = rd.to_double(f0[0]);

    for (long long s = 1; s <= d; ++s)
    {
        Tensor h(Tensor::Dims(static_cast<std::size_t>(s),
                              static_cast<std::size_t>(L)));
        for (auto& z : h.data())
        {
            auto f = rd.next("kernel entry 're im'");
            rd.expect_fields(f, 2, "kernel entry 're im'");
            z = Complex(rd.to_double(f[0]), rd.to_double(f[1]));
        }
        k.kernels.push_back(std::move(h));
    }
    if (!rd.at_end())
    {
        throw ParseError(rd.line(), "trailing data after the last kernel");
    }
    return k;
}

//-----------------------------------------------------------------------------
// Operating points: one 're im' pair per line
//-----------------------------------------------------------------------------

inline void write_points(std::ostream& out, const OperatingPoints& pts)
{
    for (const auto& mu : pts.mus)
    {
        out << format_double(mu.real()) << ' ' << format_double(mu.imag())
            << '\n';
    }
}

inline OperatingPoints read_points(std::istream& in)
{
    detail::LineReader rd(in);
    OperatingPoints pts;
    while (auto f = rd.try_next())
    {
        rd.expect_fields(*f, 2, "point 're im'");
        pts.mus.emplace_back(rd.to_double((*f)[0]), rd.to_double((*f)[1]));
    }
    return pts;
}

//-----------------------------------------------------------------------------
// Sampling matrix triplets
//
//   rows cols nnz
//   row col re im     1-based indices, column-major order
//-----------------------------------------------------------------------------

inline void write_triplets(std::ostream& out, const SamplingOperator& P)
{
    const auto& m = P.matrix();
    out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    for (Index c = 0; c < m.outerSize(); ++c)
    {
        for (SparseCMatrix::InnerIterator it(m, c); it; ++it)
        {
            out << it.row() + 1 << ' ' << it.col() + 1 << ' '
                << format_double(it.value().real()) << ' '
                << format_double(it.value().imag()) << '\n';
        }
    }
}

inline SparseCMatrix read_triplets(std::istream& in)
{
    detail::LineReader rd(in);
    auto head = rd.next("header 'rows cols nnz'");
    rd.expect_fields(head, 3, "header 'rows cols nnz'");
    const auto rows = rd.to_integer(head[0]);
    const auto cols = rd.to_integer(head[1]);
    const auto nnz  = rd.to_integer(head[2]);
    std::vector<Eigen::Triplet<Complex>> t;
    for (long long n = 0; n < nnz; ++n)
    {
        auto f = rd.next("triplet 'row col re im'");
        rd.expect_fields(f, 4, "triplet 'row col re im'");
        const auto i = rd.to_integer(f[0]);
        const auto j = rd.to_integer(f[1]);
        if (i < 1 || i > rows || j < 1 || j > cols)
        {
            throw ParseError(rd.line(), "triplet index out of range");
        }
        t.emplace_back(i - 1, j - 1,
                       Complex(rd.to_double(f[2]), rd.to_double(f[3])));
    }
    SparseCMatrix m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

//-----------------------------------------------------------------------------
// Residual history CSV: header 'cycle,residual', cycles from 1
//-----------------------------------------------------------------------------

inline void write_residual_csv(std::ostream& out,
                               const std::vector<double>& history)
{
    out << "cycle,residual\n";
    for (std::size_t c = 0; c < history.size(); ++c)
    {
        out << c + 1 << ',' << format_double(history[c]) << '\n';
    }
}

} // namespace pwhid

#endif /* PWHID_IO_HPP */
