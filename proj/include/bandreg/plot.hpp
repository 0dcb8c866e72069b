#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bandreg/fields.hpp"

namespace bandreg::plot
{
    /// Linear rescale of an image to [0, 1] (constant images map to 0.5).
    inline SpatialImage normalized(const SpatialImage& img)
    {
        const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
        SpatialImage out(img.extents());
        const double span = *hi - *lo;
        for (std::size_t i = 0; i < img.size(); ++i)
        {
            out[i] = span > 0.0 ? (img[i] - *lo) / span : 0.5;
        }
        return out;
    }

    namespace detail
    {
        inline void line(SpatialImage& c, double r0, double c0, double r1, double c1, double ink)
        {
            const int n = static_cast<int>(std::max(std::abs(r1 - r0), std::abs(c1 - c0))) + 1;
            for (int t = 0; t <= n; ++t)
            {
                const double s = static_cast<double>(t) / n;
                const int r = static_cast<int>(std::lround(r0 + s * (r1 - r0)));
                const int q = static_cast<int>(std::lround(c0 + s * (c1 - c0)));
                if (r >= 0 && r < c.extents().n[0] && q >= 0 && q < c.extents().n[1])
                {
                    c(r, q) = ink;
                }
            }
        }
    } // namespace detail

    /// Polyline of a series on a white canvas (row 0 at the top), with axis lines.
    /// A log scale is used when every value is positive and log_scale is set.
    inline SpatialImage line_plot(const std::vector<double>& ys, int height = 200, int width = 320,
                                  bool log_scale = false)
    {
        SpatialImage c(Extents(2, {height, width, 1}));
        std::fill(c.data().begin(), c.data().end(), 1.0);
        const int m = 10;
        detail::line(c, height - m, m, height - m, width - m, 0.0);
        detail::line(c, m, m, height - m, m, 0.0);
        if (ys.empty())
        {
            return c;
        }
        std::vector<double> v = ys;
        const bool use_log = log_scale && std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
        if (use_log)
        {
            for (auto& x : v)
            {
                x = std::log10(x);
            }
        }
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        const double span = *hi - *lo > 0.0 ? *hi - *lo : 1.0;
        auto row = [&](double y) { return height - m - (y - *lo) / span * (height - 2 * m); };
        auto col = [&](std::size_t i) {
            return v.size() == 1 ? m : m + static_cast<double>(i) / (v.size() - 1) * (width - 2 * m);
        };
        for (std::size_t i = 0; i + 1 < v.size(); ++i)
        {
            detail::line(c, row(v[i]), col(i), row(v[i + 1]), col(i + 1), 0.0);
        }
        if (v.size() == 1)
        {
            detail::line(c, row(v[0]), m, row(v[0]), width - m, 0.0);
        }
        return c;
    }

    /// Grouped bars, one gray level per series; values are clamped at zero.
    inline SpatialImage bar_plot(const std::vector<std::vector<double>>& series, int height = 200, int width = 320)
    {
        SpatialImage c(Extents(2, {height, width, 1}));
        std::fill(c.data().begin(), c.data().end(), 1.0);
        const int m = 10;
        detail::line(c, height - m, m, height - m, width - m, 0.0);
        double top = 0.0;
        std::size_t groups = 0;
        for (const auto& s : series)
        {
            groups = std::max(groups, s.size());
            for (double x : s)
            {
                top = std::max(top, x);
            }
        }
        if (groups == 0 || top <= 0.0)
        {
            return c;
        }
        const double slot = static_cast<double>(width - 2 * m) / groups;
        const double bar = slot / (series.size() + 1);
        for (std::size_t k = 0; k < series.size(); ++k)
        {
            const double ink = series.size() == 1 ? 0.0 : 0.6 * k / (series.size() - 1);
            for (std::size_t g = 0; g < series[k].size(); ++g)
            {
                const int h = static_cast<int>(std::max(0.0, series[k][g]) / top * (height - 2 * m));
                const int c0 = static_cast<int>(m + g * slot + (k + 0.5) * bar);
                const int c1 = static_cast<int>(c0 + bar) - 1;
                for (int r = height - m - h; r < height - m; ++r)
                {
                    for (int q = std::max(c0, 0); q <= std::min(c1, width - 1); ++q)
                    {
                        c(r, q) = ink;
                    }
                }
            }
        }
        return c;
    }

    /// Images side by side with a one-pixel white gutter; each panel keeps its own values.
    inline SpatialImage panels(const std::vector<SpatialImage>& imgs)
    {
        if (imgs.empty())
        {
            throw std::invalid_argument("panels: nothing to draw");
        }
        int h = 0;
        int w = 0;
        for (const auto& im : imgs)
        {
            if (im.extents().dim != 2)
            {
                throw std::invalid_argument("panels: 2D images only");
            }
            h = std::max(h, im.extents().n[0]);
            w += im.extents().n[1] + 1;
        }
        SpatialImage c(Extents(2, {h, w - 1, 1}));
        std::fill(c.data().begin(), c.data().end(), 1.0);
        int off = 0;
        for (const auto& im : imgs)
        {
            for (int r = 0; r < im.extents().n[0]; ++r)
            {
                for (int q = 0; q < im.extents().n[1]; ++q)
                {
                    c(r, off + q) = im(r, q);
                }
            }
            off += im.extents().n[1] + 1;
        }
        return c;
    }

} // namespace bandreg::plot
