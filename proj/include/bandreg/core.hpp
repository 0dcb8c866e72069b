#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace bandreg
{
    using cplx = std::complex<double>;

    inline constexpr double pi = 3.14159265358979323846;

    /// Thrown when two operands disagree on grid, band, or dimension.
    class SpecMismatch : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    /// Non-finite values appeared during integration or energy evaluation.
    class DivergedError : public std::runtime_error
    {
    public:
        DivergedError(const std::string& what, int step)
            : std::runtime_error(what), step_(step)
        {
        }

        int step() const { return step_; }

    private:
        int step_;
    };

    class IoError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Malformed header, truncated payload or checksum mismatch.
    class FormatError : public IoError
    {
    public:
        using IoError::IoError;
    };

    /// Axis sizes of a 2D or 3D row-major array. Axes at or beyond `dim` have size 1.
    struct Extents
    {
        int dim = 2;
        std::array<int, 3> n{1, 1, 1};

        Extents() = default;

        Extents(int d, std::array<int, 3> sizes) : dim(d), n(sizes)
        {
            if (d != 2 && d != 3)
            {
                throw std::invalid_argument("only 2D and 3D grids are supported");
            }
            for (int k = 0; k < 3; ++k)
            {
                if (k >= d)
                {
                    n[k] = 1;
                }
                else if (n[k] < 1)
                {
                    throw std::invalid_argument("axis sizes must be positive");
                }
            }
        }

        static Extents uniform(int d, int size)
        {
            return Extents(d, {size, size, d == 3 ? size : 1});
        }

        std::size_t size() const
        {
            return static_cast<std::size_t>(n[0]) * n[1] * n[2];
        }

        std::size_t index(int i0, int i1, int i2) const
        {
            return (static_cast<std::size_t>(i0) * n[1] + i1) * n[2] + i2;
        }

        std::size_t index(const std::array<int, 3>& i) const { return index(i[0], i[1], i[2]); }

        std::array<int, 3> unravel(std::size_t flat) const
        {
            std::array<int, 3> i{};
            i[2] = static_cast<int>(flat % n[2]);
            flat /= n[2];
            i[1] = static_cast<int>(flat % n[1]);
            i[0] = static_cast<int>(flat / n[1]);
            return i;
        }

        friend bool operator==(const Extents& a, const Extents& b)
        {
            return a.dim == b.dim && a.n == b.n;
        }
    };

    /// Calls f(idx, flat) for every multi-index in row-major order.
    template <class F>
    void for_each_index(const Extents& ext, F&& f)
    {
        std::size_t flat = 0;
        for (int i0 = 0; i0 < ext.n[0]; ++i0)
        {
            for (int i1 = 0; i1 < ext.n[1]; ++i1)
            {
                for (int i2 = 0; i2 < ext.n[2]; ++i2)
                {
                    f(std::array<int, 3>{i0, i1, i2}, flat++);
                }
            }
        }
    }

    inline int wrap_index(int i, int n)
    {
        int r = i % n;
        return r < 0 ? r + n : r;
    }

    /// Shape of a truncated spectrum: `band` centered frequencies retained per axis
    /// out of a `grid`-point periodic spatial grid.
    ///
    /// Band index b on axis k holds signed frequency b - band/2, so DC sits at band/2.
    /// The unpaired frequency -band/2 is kept in storage but always zero.
    struct BandSpec
    {
        int dim = 2;
        std::array<int, 3> band{1, 1, 1};
        std::array<int, 3> grid{1, 1, 1};

        BandSpec() = default;

        BandSpec(int d, std::array<int, 3> band_sizes, std::array<int, 3> grid_sizes)
            : dim(d), band(band_sizes), grid(grid_sizes)
        {
            if (d != 2 && d != 3)
            {
                throw std::invalid_argument("BandSpec: dim must be 2 or 3");
            }
            for (int k = 0; k < 3; ++k)
            {
                if (k >= d)
                {
                    band[k] = 1;
                    grid[k] = 1;
                    continue;
                }
                if (band[k] < 2 || band[k] % 2 != 0)
                {
                    throw std::invalid_argument("BandSpec: band must be even and >= 2");
                }
                if (grid[k] < band[k])
                {
                    throw std::invalid_argument("BandSpec: band exceeds grid on axis " +
                                                std::to_string(k));
                }
            }
        }

        static BandSpec uniform(int d, int band_size, int grid_size)
        {
            const int b3 = d == 3 ? band_size : 1;
            const int g3 = d == 3 ? grid_size : 1;
            return BandSpec(d, {band_size, band_size, b3}, {grid_size, grid_size, g3});
        }

        Extents band_extents() const { return Extents(dim, band); }
        Extents grid_extents() const { return Extents(dim, grid); }
        std::size_t size() const { return band_extents().size(); }

        int freq(int axis, int b) const { return axis < dim ? b - band[axis] / 2 : 0; }

        std::array<int, 3> freqs(const std::array<int, 3>& b) const
        {
            return {freq(0, b[0]), freq(1, b[1]), freq(2, b[2])};
        }

        /// Band index holding signed frequency xi; -1 when outside the band.
        int band_index(int axis, int xi) const
        {
            if (axis >= dim)
            {
                return xi == 0 ? 0 : -1;
            }
            const int b = xi + band[axis] / 2;
            return (b >= 0 && b < band[axis]) ? b : -1;
        }

        /// False on the unpaired -band/2 planes.
        bool is_retained(const std::array<int, 3>& b) const
        {
            for (int k = 0; k < dim; ++k)
            {
                if (b[k] == 0)
                {
                    return false;
                }
            }
            return true;
        }

        /// Flat index of -xi for a retained index.
        std::size_t mirror(const std::array<int, 3>& b) const
        {
            std::array<int, 3> m{0, 0, 0};
            for (int k = 0; k < dim; ++k)
            {
                m[k] = band[k] - b[k];
            }
            return band_extents().index(m);
        }

        friend bool operator==(const BandSpec& a, const BandSpec& b)
        {
            return a.dim == b.dim && a.band == b.band && a.grid == b.grid;
        }
    };

    inline void require_same(const BandSpec& a, const BandSpec& b, const char* where)
    {
        if (!(a == b))
        {
            throw SpecMismatch(std::string(where) + ": band specs differ");
        }
    }

} // namespace bandreg
