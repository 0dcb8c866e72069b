#pragma once

#include <vector>

#include "bandreg/shooting.hpp"

namespace bandreg
{
    /// Fused forward-Euler integration of EPDiff and the displacement flow.
    ///
    /// Computes the same u_1 as integrate_diffeo(integrate_epdiff(v0, op, steps))
    /// but keeps every spatial product on the 2*band padded grid with real
    /// transforms and preallocated buffers. Inputs are assumed Hermitian; the
    /// half-spectrum transforms project onto Hermitian spectra implicitly.
    ///
    /// Not thread-safe: one kernel per thread.
    class ShootingKernel
    {
    public:
        ShootingKernel(const SmoothingOperator& op, int steps)
            : op_(op), steps_(steps), spec_(op.spec()), pad_(detail::padded_extents(spec_))
        {
            if (steps < 1)
            {
                throw std::invalid_argument("ShootingKernel: steps must be >= 1");
            }
            const int d = spec_.dim;
            const auto bext = spec_.band_extents();
            const int last = d - 1;
            for_each_index(bext, [&](const std::array<int, 3>& b, std::size_t flat) {
                if (!spec_.is_retained(b))
                {
                    return;
                }
                const auto xi = spec_.freqs(b);
                Slot s{flat, 0, false, 0};
                s.conjugate = xi[last] < 0;
                const auto src = s.conjugate ? spec_.band_extents().unravel(spec_.mirror(b)) : b;
                s.half = half_index(spec_.freqs(src), pad_);
                s.mirror = spec_.mirror(b);
                slots_.push_back(s);
            });
            for (int k = 0; k < d; ++k)
            {
                symbols_.push_back(detail::central_difference_symbol(spec_, k));
            }
            const std::size_t np = pad_.size();
            const std::size_t nb = spec_.size();
            half_.resize(fft::half_spectrum_size(pad_));
            prod_.resize(np);
            v_.assign(d, std::vector<cplx>(nb));
            u_.assign(d, std::vector<cplx>(nb));
            m_.assign(d, std::vector<cplx>(nb));
            rhs_.assign(d, std::vector<cplx>(nb));
            du_.assign(d, std::vector<cplx>(nb));
            tmp_.resize(nb);
            vs_.assign(d, fft::aligned_vector<double>(np));
            ms_.assign(d, fft::aligned_vector<double>(np));
            dvs_.assign(d * d, fft::aligned_vector<double>(np));
            dus_.assign(d * d, fft::aligned_vector<double>(np));
        }

        const BandSpec& spec() const { return spec_; }
        int steps() const { return steps_; }

        /// Final displacement spectrum u_1.
        FreqVectorField displacement(const FreqVectorField& v0)
        {
            require_same(v0.spec(), spec_, "ShootingKernel");
            const int d = spec_.dim;
            for (int j = 0; j < d; ++j)
            {
                std::copy(v0[j].coeffs().begin(), v0[j].coeffs().end(), v_[j].begin());
                std::fill(u_[j].begin(), u_[j].end(), cplx{});
            }
            const double dt = 1.0 / steps_;
            const auto lco = op_.lcoeffs();
            const auto kco = op_.kcoeffs();
            const std::size_t np = pad_.size();

            for (int s = 0; s < steps_; ++s)
            {
                for (int j = 0; j < d; ++j)
                {
                    for (const auto& sl : slots_)
                    {
                        m_[j][sl.flat] = lco[sl.flat] * v_[j][sl.flat];
                    }
                    to_padded(v_[j], vs_[j]);
                    to_padded(m_[j], ms_[j]);
                    for (int k = 0; k < d; ++k)
                    {
                        differentiate(v_[j], k);
                        to_padded(tmp_, dvs_[j * d + k]);
                        differentiate(u_[j], k);
                        to_padded(tmp_, dus_[j * d + k]);
                    }
                }
                for (int j = 0; j < d; ++j)
                {
                    // (Dv)^T m, component j
                    std::fill(prod_.begin(), prod_.end(), 0.0);
                    for (int i = 0; i < d; ++i)
                    {
                        const auto& a = dvs_[i * d + j];
                        const auto& b = ms_[i];
                        for (std::size_t p = 0; p < np; ++p)
                        {
                            prod_[p] += a[p] * b[p];
                        }
                    }
                    from_padded(prod_, rhs_[j]);
                    // div(m v^T), component j
                    for (int k = 0; k < d; ++k)
                    {
                        for (std::size_t p = 0; p < np; ++p)
                        {
                            prod_[p] = ms_[j][p] * vs_[k][p];
                        }
                        from_padded(prod_, tmp_);
                        const auto& sym = symbols_[k];
                        for (const auto& sl : slots_)
                        {
                            rhs_[j][sl.flat] += sym[sl.flat] * tmp_[sl.flat];
                        }
                    }
                    // (Du) v, component j
                    std::fill(prod_.begin(), prod_.end(), 0.0);
                    for (int k = 0; k < d; ++k)
                    {
                        const auto& a = dus_[j * d + k];
                        const auto& b = vs_[k];
                        for (std::size_t p = 0; p < np; ++p)
                        {
                            prod_[p] += a[p] * b[p];
                        }
                    }
                    from_padded(prod_, du_[j]);
                }
                bool finite = true;
                for (int j = 0; j < d; ++j)
                {
                    for (const auto& sl : slots_)
                    {
                        const std::size_t f = sl.flat;
                        u_[j][f] -= dt * (v_[j][f] + du_[j][f]);
                        v_[j][f] -= dt * kco[f] * rhs_[j][f];
                        finite = finite && std::isfinite(v_[j][f].real()) && std::isfinite(v_[j][f].imag()) &&
                                 std::isfinite(u_[j][f].real()) && std::isfinite(u_[j][f].imag());
                    }
                }
                if (!finite)
                {
                    throw DivergedError("shooting diverged at step " + std::to_string(s + 1), s + 1);
                }
            }
            FreqVectorField u(spec_);
            for (int j = 0; j < d; ++j)
            {
                std::copy(u_[j].begin(), u_[j].end(), u[j].coeffs().begin());
            }
            return u;
        }

        /// psi_1 = x + u_1(x) realized on `grid`.
        DeformationField deformation(const FreqVectorField& v0, const Extents& grid)
        {
            const auto u = displacement(v0);
            return realize(u, grid);
        }

        /// Band-to-grid realization through the half-spectrum transform.
        DeformationField realize(const FreqVectorField& u, const Extents& grid)
        {
            detail::require_grid_covers_band(spec_, grid);
            if (!(grid == grid_))
            {
                grid_ = grid;
                grid_half_.resize(fft::half_spectrum_size(grid));
                grid_slots_.clear();
                for (const auto& sl : slots_)
                {
                    if (!sl.conjugate)
                    {
                        const auto b = spec_.band_extents().unravel(sl.flat);
                        grid_slots_.push_back({sl.flat, half_index(spec_.freqs(b), grid), false, 0});
                    }
                }
            }
            DeformationField psi{SpatialVectorField(grid)};
            for (int j = 0; j < spec_.dim; ++j)
            {
                std::fill(grid_half_.begin(), grid_half_.end(), cplx{});
                for (const auto& sl : grid_slots_)
                {
                    grid_half_[sl.half] = u[j][sl.flat];
                }
                fft::inverse_real(grid_half_, psi.displacement[j].data(), grid);
            }
            return psi;
        }

    private:
        struct Slot
        {
            std::size_t flat;   // band index
            std::size_t half;   // half-spectrum index of xi (or of -xi when conjugate)
            bool conjugate;     // xi has negative last-axis frequency
            std::size_t mirror; // band index of -xi
        };

        static std::size_t half_index(const std::array<int, 3>& xi, const Extents& ext)
        {
            const int d = ext.dim;
            std::size_t idx = 0;
            for (int k = 0; k < d; ++k)
            {
                const int size = k + 1 == d ? ext.n[k] / 2 + 1 : ext.n[k];
                const int pos = k + 1 == d ? xi[k] : wrap_index(xi[k], ext.n[k]);
                idx = idx * size + pos;
            }
            return idx;
        }

        void differentiate(const std::vector<cplx>& f, int axis)
        {
            const auto& sym = symbols_[axis];
            for (const auto& sl : slots_)
            {
                tmp_[sl.flat] = sym[sl.flat] * f[sl.flat];
            }
        }

        void to_padded(const std::vector<cplx>& band, fft::aligned_vector<double>& out)
        {
            std::fill(half_.begin(), half_.end(), cplx{});
            for (const auto& sl : slots_)
            {
                if (!sl.conjugate)
                {
                    half_[sl.half] = band[sl.flat];
                }
            }
            fft::inverse_real(half_, out, pad_);
        }

        void from_padded(const fft::aligned_vector<double>& in, std::vector<cplx>& band)
        {
            fft::forward_real(in, half_, pad_);
            const double scale = 1.0 / static_cast<double>(pad_.size());
            for (const auto& sl : slots_)
            {
                const cplx c = half_[sl.half] * scale;
                band[sl.flat] = sl.conjugate ? std::conj(c) : c;
            }
        }

        SmoothingOperator op_;
        int steps_;
        BandSpec spec_;
        Extents pad_;
        std::vector<Slot> slots_;
        std::vector<std::vector<cplx>> symbols_;

        fft::aligned_vector<cplx> half_;
        fft::aligned_vector<double> prod_;
        std::vector<std::vector<cplx>> v_, u_, m_, rhs_, du_;
        std::vector<cplx> tmp_;
        std::vector<fft::aligned_vector<double>> vs_, ms_, dvs_, dus_;

        Extents grid_{};
        fft::aligned_vector<cplx> grid_half_;
        std::vector<Slot> grid_slots_;
    };

} // namespace bandreg
