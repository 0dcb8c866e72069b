#pragma once

#include <cmath>
#include <vector>

#include "bandreg/fft.hpp"
#include "bandreg/fields.hpp"

namespace bandreg
{
    // Coefficients follow a value-preserving convention: the forward transform is
    // scaled by 1/N, so a constant field c has DC coefficient c and the DC-only
    // field of value 1 is the identity of truncated_convolve.

    /// Diagonal Fourier symbol of (-alpha * Laplacian + I)^power (L) and its reciprocal (K).
    ///
    /// Frequencies are normalized by the grid size, xi_j / grid_j, which makes the
    /// symbol that of the unit-spacing 2*d+1 point discrete Laplacian.
    class SmoothingOperator
    {
    public:
        SmoothingOperator() = default;

        SmoothingOperator(double alpha, int power, const BandSpec& spec)
            : alpha_(alpha), power_(power), spec_(spec), lcoeffs_(spec.size()), kcoeffs_(spec.size())
        {
            if (!(alpha > 0.0))
            {
                throw std::invalid_argument("SmoothingOperator: alpha must be positive");
            }
            if (power < 1)
            {
                throw std::invalid_argument("SmoothingOperator: power must be >= 1");
            }
            for_each_index(spec.band_extents(), [&](const std::array<int, 3>& b, std::size_t flat) {
                double s = 0.0;
                for (int j = 0; j < spec.dim; ++j)
                {
                    s += std::cos(2.0 * pi * spec.freq(j, b[j]) / spec.grid[j]) - 1.0;
                }
                const double l = std::pow(-2.0 * alpha * s + 1.0, power);
                lcoeffs_[flat] = l;
                kcoeffs_[flat] = 1.0 / l;
            });
        }

        double alpha() const { return alpha_; }
        int power() const { return power_; }
        const BandSpec& spec() const { return spec_; }
        std::span<const double> lcoeffs() const { return lcoeffs_; }
        std::span<const double> kcoeffs() const { return kcoeffs_; }

    private:
        double alpha_ = 0.0;
        int power_ = 0;
        BandSpec spec_;
        std::vector<double> lcoeffs_;
        std::vector<double> kcoeffs_;
    };

    inline SmoothingOperator make_operator(double alpha, int power, const BandSpec& spec)
    {
        return SmoothingOperator(alpha, power, spec);
    }

    namespace detail
    {
        inline void require_grid_covers_band(const BandSpec& spec, const Extents& grid)
        {
            if (grid.dim != spec.dim)
            {
                throw SpecMismatch("grid dimension differs from band dimension");
            }
            for (int k = 0; k < spec.dim; ++k)
            {
                if (grid.n[k] < spec.band[k])
                {
                    throw SpecMismatch("grid smaller than band on axis " + std::to_string(k));
                }
            }
        }

        /// Scatters band coefficients into a zeroed full spectrum on `grid`.
        inline void scatter_band(const FreqScalarField& f, const Extents& grid, std::span<cplx> full)
        {
            std::fill(full.begin(), full.end(), cplx{});
            const auto& spec = f.spec();
            for_each_index(spec.band_extents(), [&](const std::array<int, 3>& b, std::size_t flat) {
                if (!spec.is_retained(b))
                {
                    return;
                }
                std::array<int, 3> g{0, 0, 0};
                for (int k = 0; k < spec.dim; ++k)
                {
                    g[k] = wrap_index(spec.freq(k, b[k]), grid.n[k]);
                }
                full[grid.index(g)] = f[flat];
            });
        }

        /// Gathers the retained band out of a full (already 1/N scaled) spectrum.
        inline FreqScalarField gather_band(std::span<const cplx> full, const Extents& grid, const BandSpec& spec)
        {
            FreqScalarField out(spec);
            for_each_index(spec.band_extents(), [&](const std::array<int, 3>& b, std::size_t flat) {
                if (!spec.is_retained(b))
                {
                    return;
                }
                std::array<int, 3> g{0, 0, 0};
                for (int k = 0; k < spec.dim; ++k)
                {
                    g[k] = wrap_index(spec.freq(k, b[k]), grid.n[k]);
                }
                out[flat] = full[grid.index(g)];
            });
            return out;
        }

        /// Complex spatial samples of a band field on an arbitrary grid >= band.
        inline std::vector<cplx> band_to_spatial_complex(const FreqScalarField& f, const Extents& grid)
        {
            require_grid_covers_band(f.spec(), grid);
            std::vector<cplx> buf(grid.size());
            scatter_band(f, grid, buf);
            fft::transform(buf, grid, fft::Direction::inverse);
            return buf;
        }

        inline FreqScalarField complex_to_band(std::vector<cplx> buf, const Extents& grid, const BandSpec& spec)
        {
            fft::transform(buf, grid, fft::Direction::forward);
            const double scale = 1.0 / static_cast<double>(grid.size());
            for (auto& c : buf)
            {
                c *= scale;
            }
            return gather_band(buf, grid, spec);
        }

        /// Zero-padded spatial grid of 2*band per axis: products of two band fields
        /// have frequencies in [-band+2, band-2] and never wrap around on it.
        inline Extents padded_extents(const BandSpec& spec)
        {
            return Extents(spec.dim, {2 * spec.band[0], 2 * spec.band[1], spec.dim == 3 ? 2 * spec.band[2] : 1});
        }

        inline std::vector<cplx> lift(const FreqScalarField& f)
        {
            return band_to_spatial_complex(f, padded_extents(f.spec()));
        }

        inline FreqScalarField project(std::vector<cplx> buf, const BandSpec& spec)
        {
            return complex_to_band(std::move(buf), padded_extents(spec), spec);
        }

        /// Multiplier of the unit-spacing central difference along `axis`:
        /// i sin(2 pi xi / grid).
        inline std::vector<cplx> central_difference_symbol(const BandSpec& spec, int axis)
        {
            std::vector<cplx> sym(spec.size());
            for_each_index(spec.band_extents(), [&](const std::array<int, 3>& b, std::size_t flat) {
                sym[flat] = cplx(0.0, std::sin(2.0 * pi * spec.freq(axis, b[axis]) / spec.grid[axis]));
            });
            return sym;
        }
    } // namespace detail

    /// Forward DFT of a real image (scaled by 1/N), truncated to the centered band.
    inline FreqScalarField spatial_to_band(const SpatialImage& img, const BandSpec& spec)
    {
        if (!(img.extents() == spec.grid_extents()))
        {
            throw SpecMismatch("spatial_to_band: image grid does not match band spec grid");
        }
        std::vector<cplx> buf(img.data().begin(), img.data().end());
        return detail::complex_to_band(std::move(buf), img.extents(), spec);
    }

    inline FreqVectorField spatial_to_band(const SpatialVectorField& field, const BandSpec& spec)
    {
        if (field.dim() != spec.dim)
        {
            throw SpecMismatch("spatial_to_band: component count differs from dim");
        }
        FreqVectorField out(spec);
        for (int j = 0; j < spec.dim; ++j)
        {
            out[j] = spatial_to_band(field[j], spec);
        }
        return out;
    }

    /// Zero-pads to the full spectrum of `grid` and inverts. The imaginary residue
    /// (rounding only, for Hermitian input) is dropped.
    inline SpatialImage band_to_spatial(const FreqScalarField& f, const Extents& grid)
    {
        const auto buf = detail::band_to_spatial_complex(f, grid);
        SpatialImage out(grid);
        for (std::size_t i = 0; i < buf.size(); ++i)
        {
            out[i] = buf[i].real();
        }
        return out;
    }

    inline SpatialVectorField band_to_spatial(const FreqVectorField& v, const Extents& grid)
    {
        SpatialVectorField out;
        out.components.reserve(v.dim());
        for (int j = 0; j < v.dim(); ++j)
        {
            out.components.push_back(band_to_spatial(v[j], grid));
        }
        return out;
    }

    inline SpatialImage band_to_spatial(const FreqScalarField& f) { return band_to_spatial(f, f.spec().grid_extents()); }
    inline SpatialVectorField band_to_spatial(const FreqVectorField& v) { return band_to_spatial(v, v.spec().grid_extents()); }

    /// Circular convolution of two band spectra, zero padded against wrap-around and
    /// truncated back to the band. Equals the band part of the pointwise spatial product.
    inline FreqScalarField truncated_convolve(const FreqScalarField& a, const FreqScalarField& b)
    {
        require_same(a.spec(), b.spec(), "truncated_convolve");
        auto pa = detail::lift(a);
        const auto pb = detail::lift(b);
        for (std::size_t i = 0; i < pa.size(); ++i)
        {
            pa[i] *= pb[i];
        }
        return detail::project(std::move(pa), a.spec());
    }

    /// Entry (j, k) = D_k v_j with the central-difference symbol.
    inline FreqTensorField jacobian(const FreqVectorField& v)
    {
        const auto& spec = v.spec();
        const int d = spec.dim;
        FreqTensorField out(spec);
        for (int k = 0; k < d; ++k)
        {
            const auto sym = detail::central_difference_symbol(spec, k);
            for (int j = 0; j < d; ++j)
            {
                auto& e = out(j, k);
                for (std::size_t i = 0; i < sym.size(); ++i)
                {
                    e[i] = sym[i] * v[j][i];
                }
            }
        }
        return out;
    }

    /// Truncated matrix-vector auto-correlation: component k = sum_j A_jk (star) m_j,
    /// where a (star) b (xi) = sum_eta conj(a(eta)) b(xi + eta).
    ///
    /// For Hermitian A this is the spectrum of the spatial product A(x)^T m(x).
    inline FreqVectorField correlate(const FreqTensorField& A, const FreqVectorField& m)
    {
        require_same(A.spec(), m.spec(), "correlate");
        const auto& spec = m.spec();
        const int d = spec.dim;
        std::vector<std::vector<cplx>> lm;
        lm.reserve(d);
        for (int j = 0; j < d; ++j)
        {
            lm.push_back(detail::lift(m[j]));
        }
        FreqVectorField out(spec);
        const std::size_t n = lm.front().size();
        for (int k = 0; k < d; ++k)
        {
            std::vector<cplx> acc(n);
            for (int j = 0; j < d; ++j)
            {
                // Mirrored conjugate in frequency is plain conjugation in space.
                const auto la = detail::lift(A(j, k));
                for (std::size_t i = 0; i < n; ++i)
                {
                    acc[i] += std::conj(la[i]) * lm[j][i];
                }
            }
            out[k] = detail::project(std::move(acc), spec);
        }
        return out;
    }

    /// Entry (j, k) = m_j * v_k (truncated convolution), i.e. the outer product m v^T.
    inline FreqTensorField tensor_product(const FreqVectorField& m, const FreqVectorField& v)
    {
        require_same(m.spec(), v.spec(), "tensor_product");
        const auto& spec = m.spec();
        const int d = spec.dim;
        std::vector<std::vector<cplx>> lm, lv;
        for (int j = 0; j < d; ++j)
        {
            lm.push_back(detail::lift(m[j]));
            lv.push_back(detail::lift(v[j]));
        }
        FreqTensorField out(spec);
        for (int j = 0; j < d; ++j)
        {
            for (int k = 0; k < d; ++k)
            {
                std::vector<cplx> p(lm[j].size());
                for (std::size_t i = 0; i < p.size(); ++i)
                {
                    p[i] = lm[j][i] * lv[k][i];
                }
                out(j, k) = detail::project(std::move(p), spec);
            }
        }
        return out;
    }

    /// Component j = sum_k D_k M_jk (contracts the second index).
    inline FreqVectorField divergence(const FreqTensorField& M)
    {
        const auto& spec = M.spec();
        const int d = spec.dim;
        FreqVectorField out(spec);
        for (int k = 0; k < d; ++k)
        {
            const auto sym = detail::central_difference_symbol(spec, k);
            for (int j = 0; j < d; ++j)
            {
                auto& o = out[j];
                const auto& e = M(j, k);
                for (std::size_t i = 0; i < sym.size(); ++i)
                {
                    o[i] += sym[i] * e[i];
                }
            }
        }
        return out;
    }

    /// Component j = sum_k A_jk * v_k (truncated convolution); with A = jacobian(u)
    /// this is the spectrum of Du(x) v(x).
    inline FreqVectorField contract(const FreqTensorField& A, const FreqVectorField& v)
    {
        require_same(A.spec(), v.spec(), "contract");
        const auto& spec = v.spec();
        const int d = spec.dim;
        std::vector<std::vector<cplx>> lv;
        for (int k = 0; k < d; ++k)
        {
            lv.push_back(detail::lift(v[k]));
        }
        FreqVectorField out(spec);
        for (int j = 0; j < d; ++j)
        {
            std::vector<cplx> acc(lv.front().size());
            for (int k = 0; k < d; ++k)
            {
                const auto la = detail::lift(A(j, k));
                for (std::size_t i = 0; i < acc.size(); ++i)
                {
                    acc[i] += la[i] * lv[k][i];
                }
            }
            out[j] = detail::project(std::move(acc), spec);
        }
        return out;
    }

    namespace detail
    {
        inline FreqVectorField apply_diagonal(std::span<const double> diag, const BandSpec& op_spec,
                                              const FreqVectorField& v, const char* where)
        {
            require_same(op_spec, v.spec(), where);
            FreqVectorField out = v;
            for (int j = 0; j < out.dim(); ++j)
            {
                for (std::size_t i = 0; i < diag.size(); ++i)
                {
                    out[j][i] *= diag[i];
                }
            }
            return out;
        }
    } // namespace detail

    /// Momentum m = L v.
    inline FreqVectorField apply_L(const SmoothingOperator& op, const FreqVectorField& v)
    {
        return detail::apply_diagonal(op.lcoeffs(), op.spec(), v, "apply_L");
    }

    /// Velocity v = K m.
    inline FreqVectorField apply_K(const SmoothingOperator& op, const FreqVectorField& m)
    {
        return detail::apply_diagonal(op.kcoeffs(), op.spec(), m, "apply_K");
    }

} // namespace bandreg
