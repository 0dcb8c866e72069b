#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bandreg/shooting.hpp"

namespace bandreg
{
    /// Semi-axes (voxels) of the inner and outer ellipse of one bull-eye image.
    /// Axis a runs along grid axis 0, b along axis 1.
    struct BullEyeParams
    {
        double a_in = 0.0;
        double b_in = 0.0;
        double a_out = 0.0;
        double b_out = 0.0;
    };

    struct BullEyeImage
    {
        BullEyeParams params;
        SpatialImage image;
        LabelMask mask; // 1 = inner disk, 2 = ring
    };

    inline constexpr std::uint8_t inner_label = 1;
    inline constexpr std::uint8_t ring_label = 2;

    namespace detail
    {
        /// Periodic separable Gaussian blur, kernel truncated at 4 sigma.
        inline SpatialImage gaussian_blur(const SpatialImage& img, double sigma)
        {
            const int radius = static_cast<int>(std::ceil(4.0 * sigma));
            std::vector<double> kernel(2 * radius + 1);
            double total = 0.0;
            for (int t = -radius; t <= radius; ++t)
            {
                kernel[t + radius] = std::exp(-0.5 * t * t / (sigma * sigma));
                total += kernel[t + radius];
            }
            for (auto& w : kernel)
            {
                w /= total;
            }
            SpatialImage cur = img;
            const auto& ext = img.extents();
            for (int axis = 0; axis < ext.dim; ++axis)
            {
                SpatialImage next(ext);
                for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t flat) {
                    double acc = 0.0;
                    for (int t = -radius; t <= radius; ++t)
                    {
                        auto q = i;
                        q[axis] += t;
                        acc += kernel[t + radius] * cur.wrapped(q[0], q[1], q[2]);
                    }
                    next[flat] = acc;
                });
                cur = std::move(next);
            }
            return cur;
        }

        /// Draws until 0.5 <= inner < outer <= 0.45 * grid on both axes.
        template <class Rng>
        BullEyeParams draw_bulleye_params(Rng& rng, int grid)
        {
            std::normal_distribution<double> inner(4.0, 2.0);
            std::normal_distribution<double> outer(13.0, 4.0);
            const double max_outer = 0.45 * grid;
            auto draw_axis = [&](double& in, double& out) {
                for (;;)
                {
                    in = inner(rng);
                    out = outer(rng);
                    if (in >= 0.5 && in < out && out <= max_outer)
                    {
                        return;
                    }
                }
            };
            BullEyeParams p;
            draw_axis(p.a_in, p.a_out);
            draw_axis(p.b_in, p.b_out);
            return p;
        }
    } // namespace detail

    /// Renders one bull-eye: 0.5 inside the inner ellipse, 1 on the ring, 0 outside,
    /// then blurred with a sigma = 1 voxel Gaussian. Center at grid/2 on each axis.
    inline BullEyeImage render_bulleye(const BullEyeParams& p, int grid, double blur_sigma = 1.0)
    {
        const Extents ext = Extents::uniform(2, grid);
        const double c = 0.5 * grid;
        BullEyeImage out{p, SpatialImage(ext), LabelMask(ext)};
        for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t flat) {
            const double x = i[0] - c;
            const double y = i[1] - c;
            const double r_in = x * x / (p.a_in * p.a_in) + y * y / (p.b_in * p.b_in);
            const double r_out = x * x / (p.a_out * p.a_out) + y * y / (p.b_out * p.b_out);
            if (r_in <= 1.0)
            {
                out.image[flat] = 0.5;
                out.mask.labels[flat] = inner_label;
            }
            else if (r_out <= 1.0)
            {
                out.image[flat] = 1.0;
                out.mask.labels[flat] = ring_label;
            }
        });
        if (blur_sigma > 0.0)
        {
            out.image = detail::gaussian_blur(out.image, blur_sigma);
            for (auto& x : out.image.data())
            {
                x = std::clamp(x, 0.0, 1.0);
            }
        }
        return out;
    }

    /// n seeded bull-eye images on a grid x grid lattice.
    inline std::vector<BullEyeImage> gen_bulleye(int n, std::uint64_t seed, int grid)
    {
        if (n < 1)
        {
            throw std::invalid_argument("gen_bulleye: n must be >= 1");
        }
        std::mt19937_64 rng(seed);
        std::vector<BullEyeImage> out;
        out.reserve(n);
        for (int i = 0; i < n; ++i)
        {
            out.push_back(render_bulleye(detail::draw_bulleye_params(rng, grid), grid));
        }
        return out;
    }

    /// Random disjoint (source, target) pairing of an image pool; odd leftovers dropped.
    inline std::vector<std::pair<int, int>> pair_indices(int n, std::uint64_t seed)
    {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i)
        {
            idx[i] = i;
        }
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; i + 1 < n; i += 2)
        {
            pairs.emplace_back(idx[i], idx[i + 1]);
        }
        return pairs;
    }

} // namespace bandreg
