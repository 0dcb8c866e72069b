#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bandreg/freq_algebra.hpp"

namespace bandreg
{
    /// Velocities along a geodesic sampled at t = 0, dt, ..., 1 and the final
    /// displacement spectrum (identity transform is the zero displacement).
    struct GeodesicPath
    {
        int steps = 0;
        std::vector<FreqVectorField> velocities;
        FreqVectorField displacement;

        double dt() const { return 1.0 / steps; }
    };

    /// psi(x) = x + u(x) on a periodic grid, u in voxels.
    struct DeformationField
    {
        SpatialVectorField displacement;

        const Extents& extents() const { return displacement.extents(); }
        int dim() const { return displacement.dim(); }

        static DeformationField identity(const Extents& ext) { return {SpatialVectorField(ext)}; }
    };

    /// dv/dt = -K [ (Dv)^T (star) m + div(m (x) v) ],  m = L v.
    inline FreqVectorField epdiff_rhs(const FreqVectorField& v, const SmoothingOperator& op)
    {
        require_same(v.spec(), op.spec(), "epdiff_rhs");
        const auto m = apply_L(op, v);
        auto force = correlate(jacobian(v), m);
        force += divergence(tensor_product(m, v));
        auto rhs = apply_K(op, force);
        rhs *= -1.0;
        return rhs;
    }

    inline GeodesicPath integrate_epdiff(const FreqVectorField& v0, const SmoothingOperator& op, int steps)
    {
        if (steps < 1)
        {
            throw std::invalid_argument("integrate_epdiff: steps must be >= 1");
        }
        require_same(v0.spec(), op.spec(), "integrate_epdiff");
        GeodesicPath path;
        path.steps = steps;
        path.velocities.reserve(steps + 1);
        path.velocities.push_back(v0);
        const double dt = 1.0 / steps;
        for (int s = 0; s < steps; ++s)
        {
            auto next = path.velocities.back();
            next.axpy(dt, epdiff_rhs(path.velocities.back(), op));
            if (!all_finite(next))
            {
                throw DivergedError("EPDiff integration diverged at step " + std::to_string(s + 1), s + 1);
            }
            path.velocities.push_back(std::move(next));
        }
        return path;
    }

    /// du/dt = -v - (Du) * v from u = 0, forward Euler over the path's velocities.
    inline FreqVectorField integrate_diffeo(const GeodesicPath& path)
    {
        if (path.steps < 1 || static_cast<int>(path.velocities.size()) != path.steps + 1)
        {
            throw std::invalid_argument("integrate_diffeo: malformed geodesic path");
        }
        const auto& spec = path.velocities.front().spec();
        const double dt = path.dt();
        FreqVectorField u(spec);
        for (int s = 0; s < path.steps; ++s)
        {
            const auto& v = path.velocities[s];
            auto du = contract(jacobian(u), v);
            du += v;
            u.axpy(-dt, du);
            if (!all_finite(u))
            {
                throw DivergedError("diffeomorphism integration diverged at step " + std::to_string(s + 1), s + 1);
            }
        }
        return u;
    }

    /// Both integrations; fills path.displacement.
    inline GeodesicPath shoot(const FreqVectorField& v0, const SmoothingOperator& op, int steps)
    {
        auto path = integrate_epdiff(v0, op, steps);
        path.displacement = integrate_diffeo(path);
        return path;
    }

    inline DeformationField to_deformation(const FreqVectorField& u, const Extents& grid)
    {
        return {band_to_spatial(u, grid)};
    }

    namespace detail
    {
        inline void require_same_grid(const Extents& a, const Extents& b, const char* where)
        {
            if (!(a == b))
            {
                throw SpecMismatch(std::string(where) + ": grid shapes differ");
            }
        }

        /// Multilinear interpolation with periodic wrap at a fractional position.
        inline double sample_periodic(const SpatialImage& img, const std::array<double, 3>& p)
        {
            const auto& ext = img.extents();
            std::array<int, 3> base{0, 0, 0};
            std::array<double, 3> frac{0.0, 0.0, 0.0};
            for (int k = 0; k < ext.dim; ++k)
            {
                const double f = std::floor(p[k]);
                base[k] = static_cast<int>(f);
                frac[k] = p[k] - f;
            }
            double acc = 0.0;
            const int corners = 1 << ext.dim;
            for (int c = 0; c < corners; ++c)
            {
                double w = 1.0;
                std::array<int, 3> q{0, 0, 0};
                for (int k = 0; k < ext.dim; ++k)
                {
                    const int bit = (c >> k) & 1;
                    w *= bit ? frac[k] : 1.0 - frac[k];
                    q[k] = base[k] + bit;
                }
                if (w != 0.0)
                {
                    acc += w * img.wrapped(q[0], q[1], q[2]);
                }
            }
            return acc;
        }
    } // namespace detail

    /// out(x) = img(psi(x)), multilinear, periodic.
    inline SpatialImage warp(const SpatialImage& img, const DeformationField& psi)
    {
        detail::require_same_grid(img.extents(), psi.extents(), "warp");
        const auto& ext = img.extents();
        SpatialImage out(ext);
        if (ext.dim == 2)
        {
            const int n0 = ext.n[0];
            const int n1 = ext.n[1];
            const auto src = img.data();
            const auto u0 = psi.displacement[0].data();
            const auto u1 = psi.displacement[1].data();
            std::size_t flat = 0;
            for (int i0 = 0; i0 < n0; ++i0)
            {
                for (int i1 = 0; i1 < n1; ++i1, ++flat)
                {
                    const double p0 = i0 + u0[flat];
                    const double p1 = i1 + u1[flat];
                    const double f0 = std::floor(p0);
                    const double f1 = std::floor(p1);
                    const double t0 = p0 - f0;
                    const double t1 = p1 - f1;
                    const int a0 = wrap_index(static_cast<int>(f0), n0);
                    const int a1 = wrap_index(static_cast<int>(f1), n1);
                    const int b0 = a0 + 1 == n0 ? 0 : a0 + 1;
                    const int b1 = a1 + 1 == n1 ? 0 : a1 + 1;
                    const double* r0 = src.data() + static_cast<std::size_t>(a0) * n1;
                    const double* r1 = src.data() + static_cast<std::size_t>(b0) * n1;
                    out[flat] = (1.0 - t0) * ((1.0 - t1) * r0[a1] + t1 * r0[b1]) +
                                t0 * ((1.0 - t1) * r1[a1] + t1 * r1[b1]);
                }
            }
            return out;
        }
        for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t flat) {
            std::array<double, 3> p{0.0, 0.0, 0.0};
            for (int k = 0; k < ext.dim; ++k)
            {
                p[k] = i[k] + psi.displacement[k][flat];
            }
            out[flat] = detail::sample_periodic(img, p);
        });
        return out;
    }

    /// Integer label map on a grid (0 = background).
    struct LabelMask
    {
        Extents extents;
        std::vector<std::uint8_t> labels;

        LabelMask() = default;
        explicit LabelMask(const Extents& ext) : extents(ext), labels(ext.size(), 0) {}

        friend bool operator==(const LabelMask&, const LabelMask&) = default;
    };

    /// Nearest-neighbour label propagation: out(x) = labels(round(psi(x))).
    inline LabelMask warp_labels(const LabelMask& mask, const DeformationField& psi)
    {
        detail::require_same_grid(mask.extents, psi.extents(), "warp_labels");
        const auto& ext = mask.extents;
        LabelMask out(ext);
        for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t flat) {
            std::array<int, 3> q{0, 0, 0};
            for (int k = 0; k < ext.dim; ++k)
            {
                q[k] = wrap_index(static_cast<int>(std::lround(i[k] + psi.displacement[k][flat])), ext.n[k]);
            }
            out.labels[flat] = mask.labels[ext.index(q)];
        });
        return out;
    }

    /// Pointwise det(I + Du) with periodic central differences.
    inline SpatialImage det_jacobian(const DeformationField& psi)
    {
        const auto& ext = psi.extents();
        const int d = ext.dim;
        SpatialImage out(ext);
        for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t flat) {
            double J[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
            for (int k = 0; k < d; ++k)
            {
                auto ip = i, im = i;
                ++ip[k];
                --im[k];
                for (int j = 0; j < d; ++j)
                {
                    const auto& u = psi.displacement[j];
                    J[j][k] += 0.5 * (u.wrapped(ip[0], ip[1], ip[2]) - u.wrapped(im[0], im[1], im[2]));
                }
            }
            if (d == 2)
            {
                out[flat] = J[0][0] * J[1][1] - J[0][1] * J[1][0];
            }
            else
            {
                out[flat] = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                            J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                            J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
            }
        });
        return out;
    }

    inline double min_value(const SpatialImage& img)
    {
        double m = img[0];
        for (double x : img.data())
        {
            m = std::min(m, x);
        }
        return m;
    }

} // namespace bandreg
