#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bandreg/core.hpp"

namespace bandreg
{
    /// Truncated complex spectrum of one scalar field, stored in centered band order.
    class FreqScalarField
    {
    public:
        FreqScalarField() = default;

        explicit FreqScalarField(const BandSpec& spec) : spec_(spec), coeffs_(spec.size()) {}

        FreqScalarField(const BandSpec& spec, std::vector<cplx> coeffs)
            : spec_(spec), coeffs_(std::move(coeffs))
        {
            if (coeffs_.size() != spec_.size())
            {
                throw SpecMismatch("FreqScalarField: coefficient count does not match band");
            }
        }

        const BandSpec& spec() const { return spec_; }
        std::size_t size() const { return coeffs_.size(); }

        std::span<const cplx> coeffs() const { return coeffs_; }
        std::span<cplx> coeffs() { return coeffs_; }

        cplx& operator[](std::size_t i) { return coeffs_[i]; }
        const cplx& operator[](std::size_t i) const { return coeffs_[i]; }

        /// Coefficient at signed frequency xi (axes beyond dim must be 0).
        cplx& at_freq(const std::array<int, 3>& xi) { return coeffs_[flat_of(xi)]; }
        const cplx& at_freq(const std::array<int, 3>& xi) const { return coeffs_[flat_of(xi)]; }

        FreqScalarField& operator+=(const FreqScalarField& o)
        {
            require_same(spec_, o.spec_, "FreqScalarField +=");
            for (std::size_t i = 0; i < coeffs_.size(); ++i)
            {
                coeffs_[i] += o.coeffs_[i];
            }
            return *this;
        }

        FreqScalarField& operator-=(const FreqScalarField& o)
        {
            require_same(spec_, o.spec_, "FreqScalarField -=");
            for (std::size_t i = 0; i < coeffs_.size(); ++i)
            {
                coeffs_[i] -= o.coeffs_[i];
            }
            return *this;
        }

        FreqScalarField& operator*=(cplx s)
        {
            for (auto& c : coeffs_)
            {
                c *= s;
            }
            return *this;
        }

        /// out += s * o
        void axpy(cplx s, const FreqScalarField& o)
        {
            require_same(spec_, o.spec_, "FreqScalarField axpy");
            for (std::size_t i = 0; i < coeffs_.size(); ++i)
            {
                coeffs_[i] += s * o.coeffs_[i];
            }
        }

        friend FreqScalarField operator+(FreqScalarField a, const FreqScalarField& b) { return a += b; }
        friend FreqScalarField operator-(FreqScalarField a, const FreqScalarField& b) { return a -= b; }
        friend FreqScalarField operator*(cplx s, FreqScalarField a) { return a *= s; }

    private:
        std::size_t flat_of(const std::array<int, 3>& xi) const
        {
            std::array<int, 3> b{};
            for (int k = 0; k < 3; ++k)
            {
                b[k] = spec_.band_index(k, xi[k]);
                if (b[k] < 0)
                {
                    throw std::out_of_range("frequency outside the retained band");
                }
            }
            return spec_.band_extents().index(b);
        }

        BandSpec spec_;
        std::vector<cplx> coeffs_;
    };

    /// Shared storage for stacks of scalar spectra that carry one BandSpec.
    template <class Derived>
    class FreqStack
    {
    public:
        const BandSpec& spec() const { return parts_.front().spec(); }
        std::size_t count() const { return parts_.size(); }

        std::span<const FreqScalarField> parts() const { return parts_; }
        std::span<FreqScalarField> parts() { return parts_; }

        Derived& operator+=(const Derived& o)
        {
            check(o);
            for (std::size_t i = 0; i < parts_.size(); ++i)
            {
                parts_[i] += o.parts_[i];
            }
            return self();
        }

        Derived& operator-=(const Derived& o)
        {
            check(o);
            for (std::size_t i = 0; i < parts_.size(); ++i)
            {
                parts_[i] -= o.parts_[i];
            }
            return self();
        }

        Derived& operator*=(cplx s)
        {
            for (auto& p : parts_)
            {
                p *= s;
            }
            return self();
        }

        void axpy(cplx s, const Derived& o)
        {
            check(o);
            for (std::size_t i = 0; i < parts_.size(); ++i)
            {
                parts_[i].axpy(s, o.parts_[i]);
            }
        }

        friend Derived operator+(Derived a, const Derived& b) { return a += b; }
        friend Derived operator-(Derived a, const Derived& b) { return a -= b; }
        friend Derived operator*(cplx s, Derived a) { return a *= s; }

    protected:
        FreqStack() = default;
        FreqStack(const BandSpec& spec, std::size_t n) : parts_(n, FreqScalarField(spec)) {}

        explicit FreqStack(std::vector<FreqScalarField> parts) : parts_(std::move(parts))
        {
            if (parts_.empty())
            {
                throw std::invalid_argument("empty field stack");
            }
            for (const auto& p : parts_)
            {
                require_same(parts_.front().spec(), p.spec(), "field stack");
            }
        }

        std::vector<FreqScalarField> parts_;

    private:
        Derived& self() { return static_cast<Derived&>(*this); }

        void check(const Derived& o) const
        {
            if (o.parts_.size() != parts_.size())
            {
                throw SpecMismatch("field stacks differ in size");
            }
            require_same(spec(), o.spec(), "field stack");
        }
    };

    /// d spectra, one per displacement/velocity component.
    class FreqVectorField : public FreqStack<FreqVectorField>
    {
    public:
        FreqVectorField() = default;
        explicit FreqVectorField(const BandSpec& spec) : FreqStack(spec, spec.dim) {}

        explicit FreqVectorField(std::vector<FreqScalarField> components)
            : FreqStack(std::move(components))
        {
            if (static_cast<int>(parts_.size()) != spec().dim)
            {
                throw SpecMismatch("FreqVectorField: component count must equal dim");
            }
        }

        int dim() const { return spec().dim; }
        FreqScalarField& operator[](int j) { return parts_[j]; }
        const FreqScalarField& operator[](int j) const { return parts_[j]; }
    };

    /// d x d spectra, entry (j, k) stored row-major.
    class FreqTensorField : public FreqStack<FreqTensorField>
    {
    public:
        FreqTensorField() = default;
        explicit FreqTensorField(const BandSpec& spec) : FreqStack(spec, spec.dim * spec.dim) {}

        int dim() const { return spec().dim; }
        FreqScalarField& operator()(int j, int k) { return parts_[j * dim() + k]; }
        const FreqScalarField& operator()(int j, int k) const { return parts_[j * dim() + k]; }
    };

    /// Real scalar field on a regular periodic grid with unit spacing.
    class SpatialImage
    {
    public:
        SpatialImage() = default;
        explicit SpatialImage(const Extents& ext, double fill = 0.0) : ext_(ext), data_(ext.size(), fill) {}

        SpatialImage(const Extents& ext, std::vector<double> data) : ext_(ext), data_(std::move(data))
        {
            if (data_.size() != ext_.size())
            {
                throw SpecMismatch("SpatialImage: data size does not match extents");
            }
        }

        const Extents& extents() const { return ext_; }
        std::size_t size() const { return data_.size(); }

        std::span<const double> data() const { return data_; }
        std::span<double> data() { return data_; }

        double& operator[](std::size_t i) { return data_[i]; }
        double operator[](std::size_t i) const { return data_[i]; }

        double& operator()(int i0, int i1, int i2 = 0) { return data_[ext_.index(i0, i1, i2)]; }
        double operator()(int i0, int i1, int i2 = 0) const { return data_[ext_.index(i0, i1, i2)]; }

        /// Periodic lookup.
        double wrapped(int i0, int i1, int i2 = 0) const
        {
            return data_[ext_.index(wrap_index(i0, ext_.n[0]), wrap_index(i1, ext_.n[1]),
                                    wrap_index(i2, ext_.n[2]))];
        }

        friend bool operator==(const SpatialImage& a, const SpatialImage& b)
        {
            return a.ext_ == b.ext_ && a.data_ == b.data_;
        }

    private:
        Extents ext_;
        std::vector<double> data_;
    };

    /// d real components on one grid.
    struct SpatialVectorField
    {
        std::vector<SpatialImage> components;

        SpatialVectorField() = default;
        explicit SpatialVectorField(const Extents& ext) : components(ext.dim, SpatialImage(ext)) {}
        explicit SpatialVectorField(std::vector<SpatialImage> comps) : components(std::move(comps)) {}

        const Extents& extents() const { return components.front().extents(); }
        int dim() const { return static_cast<int>(components.size()); }
        SpatialImage& operator[](int j) { return components[j]; }
        const SpatialImage& operator[](int j) const { return components[j]; }
    };

    // --- reductions ---------------------------------------------------------

    inline double norm2(const FreqScalarField& f)
    {
        double s = 0.0;
        for (const auto& c : f.coeffs())
        {
            s += std::norm(c);
        }
        return s;
    }

    template <class D>
    double norm2(const FreqStack<D>& f)
    {
        double s = 0.0;
        for (const auto& p : f.parts())
        {
            s += norm2(p);
        }
        return s;
    }

    template <class D>
    double norm(const FreqStack<D>& f)
    {
        return std::sqrt(norm2(f));
    }

    inline double norm(const FreqScalarField& f) { return std::sqrt(norm2(f)); }

    /// Re sum conj(a) b over every stored coefficient.
    inline double real_inner(const FreqVectorField& a, const FreqVectorField& b)
    {
        require_same(a.spec(), b.spec(), "real_inner");
        double s = 0.0;
        for (int j = 0; j < a.dim(); ++j)
        {
            for (std::size_t i = 0; i < a[j].size(); ++i)
            {
                s += (std::conj(a[j][i]) * b[j][i]).real();
            }
        }
        return s;
    }

    inline double max_abs(const FreqScalarField& f)
    {
        double m = 0.0;
        for (const auto& c : f.coeffs())
        {
            m = std::max(m, std::abs(c));
        }
        return m;
    }

    template <class D>
    double max_abs(const FreqStack<D>& f)
    {
        double m = 0.0;
        for (const auto& p : f.parts())
        {
            m = std::max(m, max_abs(p));
        }
        return m;
    }

    inline bool all_finite(const FreqScalarField& f)
    {
        return std::all_of(f.coeffs().begin(), f.coeffs().end(),
                           [](const cplx& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
    }

    template <class D>
    bool all_finite(const FreqStack<D>& f)
    {
        return std::all_of(f.parts().begin(), f.parts().end(),
                           [](const FreqScalarField& p) { return all_finite(p); });
    }

    /// Largest |c(xi) - conj(c(-xi))| over retained pairs, together with any
    /// magnitude on the unpaired -band/2 planes.
    inline double hermitian_defect(const FreqScalarField& f)
    {
        const auto& spec = f.spec();
        double defect = 0.0;
        for_each_index(spec.band_extents(), [&](const std::array<int, 3>& b, std::size_t flat) {
            if (!spec.is_retained(b))
            {
                defect = std::max(defect, std::abs(f[flat]));
                return;
            }
            defect = std::max(defect, std::abs(f[flat] - std::conj(f[spec.mirror(b)])));
        });
        return defect;
    }

    template <class D>
    double hermitian_defect(const FreqStack<D>& f)
    {
        double m = 0.0;
        for (const auto& p : f.parts())
        {
            m = std::max(m, hermitian_defect(p));
        }
        return m;
    }

    /// Orthogonal projection onto Hermitian spectra: average with the mirrored
    /// conjugate and clear the unpaired planes.
    inline FreqScalarField hermitian_part(const FreqScalarField& f)
    {
        const auto& spec = f.spec();
        FreqScalarField out(spec);
        for_each_index(spec.band_extents(), [&](const std::array<int, 3>& b, std::size_t flat) {
            if (spec.is_retained(b))
            {
                out[flat] = 0.5 * (f[flat] + std::conj(f[spec.mirror(b)]));
            }
        });
        return out;
    }

    inline FreqVectorField hermitian_part(const FreqVectorField& v)
    {
        FreqVectorField out(v.spec());
        for (int j = 0; j < v.dim(); ++j)
        {
            out[j] = hermitian_part(v[j]);
        }
        return out;
    }

    inline double sum_squares(const SpatialImage& img)
    {
        double s = 0.0;
        for (double x : img.data())
        {
            s += x * x;
        }
        return s;
    }

    /// Mean squared difference over voxels.
    inline double mean_ssd(const SpatialImage& a, const SpatialImage& b)
    {
        if (!(a.extents() == b.extents()))
        {
            throw SpecMismatch("mean_ssd: image shapes differ");
        }
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
        {
            const double d = a[i] - b[i];
            s += d * d;
        }
        return s / static_cast<double>(a.size());
    }

} // namespace bandreg
