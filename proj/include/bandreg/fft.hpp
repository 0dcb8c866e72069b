#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "bandreg/core.hpp"

namespace bandreg::fft
{
    enum class Direction
    {
        forward,
        inverse
    };

    namespace detail
    {
        // fftw planning is not thread-safe; execution of an existing plan on new
        // arrays is. Plans are in-place and unaligned so any buffer can be used.
        class PlanCache
        {
        public:
            using Key = std::tuple<int, int, int, int, int>;

            ~PlanCache()
            {
                for (auto& [key, plan] : plans_)
                {
                    fftw_destroy_plan(plan);
                }
            }

            fftw_plan get(const Extents& ext, Direction dir)
            {
                const int sign = dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD;
                const Key key{ext.dim, ext.n[0], ext.n[1], ext.n[2], sign};
                std::lock_guard<std::mutex> lock(mutex_);
                if (auto it = plans_.find(key); it != plans_.end())
                {
                    return it->second;
                }
                auto* scratch = fftw_alloc_complex(ext.size());
                fftw_plan plan = fftw_plan_dft(ext.dim, ext.n.data(), scratch, scratch, sign,
                                               FFTW_ESTIMATE | FFTW_UNALIGNED);
                fftw_free(scratch);
                plans_.emplace(key, plan);
                return plan;
            }

            /// Out-of-place real<->half-complex plans. Aligned plans may only run on
            /// SIMD-aligned buffers.
            fftw_plan get_real(const Extents& ext, Direction dir, bool aligned)
            {
                const int tag = (dir == Direction::forward ? 2 : 3) + (aligned ? 2 : 0);
                const unsigned flags = aligned ? FFTW_ESTIMATE : FFTW_ESTIMATE | FFTW_UNALIGNED;
                const Key key{ext.dim, ext.n[0], ext.n[1], ext.n[2], tag};
                std::lock_guard<std::mutex> lock(mutex_);
                if (auto it = plans_.find(key); it != plans_.end())
                {
                    return it->second;
                }
                auto* real = fftw_alloc_real(ext.size());
                auto* half = fftw_alloc_complex(half_size(ext));
                fftw_plan plan = dir == Direction::forward
                                     ? fftw_plan_dft_r2c(ext.dim, ext.n.data(), real, half, flags)
                                     : fftw_plan_dft_c2r(ext.dim, ext.n.data(), half, real, flags);
                fftw_free(real);
                fftw_free(half);
                plans_.emplace(key, plan);
                return plan;
            }

            static std::size_t half_size(const Extents& ext)
            {
                std::size_t s = 1;
                for (int k = 0; k < ext.dim; ++k)
                {
                    s *= k + 1 == ext.dim ? ext.n[k] / 2 + 1 : ext.n[k];
                }
                return s;
            }

        private:
            std::mutex mutex_;
            std::map<Key, fftw_plan> plans_;
        };

        inline PlanCache& plan_cache()
        {
            static PlanCache cache;
            return cache;
        }
    } // namespace detail

    /// Unnormalized in-place multidimensional DFT (forward uses exp(-2 pi i k x / n)).
    inline void transform(std::span<cplx> data, const Extents& ext, Direction dir)
    {
        if (data.size() != ext.size())
        {
            throw SpecMismatch("fft::transform: buffer size does not match extents");
        }
        fftw_plan plan = detail::plan_cache().get(ext, dir);
        auto* p = reinterpret_cast<fftw_complex*>(data.data());
        fftw_execute_dft(plan, p, p);
    }

    /// std::allocator replacement handing out SIMD-aligned storage from fftw_malloc.
    template <class T>
    struct AlignedAllocator
    {
        using value_type = T;

        AlignedAllocator() = default;
        template <class U>
        AlignedAllocator(const AlignedAllocator<U>&) noexcept
        {
        }

        T* allocate(std::size_t n)
        {
            void* p = fftw_malloc(n * sizeof(T));
            if (p == nullptr)
            {
                throw std::bad_alloc();
            }
            return static_cast<T*>(p);
        }

        void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }

        template <class U>
        bool operator==(const AlignedAllocator<U>&) const noexcept
        {
            return true;
        }
    };

    template <class T>
    using aligned_vector = std::vector<T, AlignedAllocator<T>>;

    /// Number of complex entries in the half spectrum of a real transform
    /// (last active axis stores frequencies 0..n/2 only).
    inline std::size_t half_spectrum_size(const Extents& ext) { return detail::PlanCache::half_size(ext); }

    /// Unnormalized real-to-half-complex forward transform.
    inline void forward_real(std::span<const double> in, std::span<cplx> half, const Extents& ext)
    {
        if (in.size() != ext.size() || half.size() != half_spectrum_size(ext))
        {
            throw SpecMismatch("fft::forward_real: buffer sizes do not match extents");
        }
        auto* src = const_cast<double*>(in.data());
        auto* dst = reinterpret_cast<fftw_complex*>(half.data());
        const bool aligned = fftw_alignment_of(src) == 0 && fftw_alignment_of(reinterpret_cast<double*>(dst)) == 0;
        fftw_plan plan = detail::plan_cache().get_real(ext, Direction::forward, aligned);
        fftw_execute_dft_r2c(plan, src, dst);
    }

    /// Unnormalized half-complex-to-real inverse transform. Overwrites `half`.
    inline void inverse_real(std::span<cplx> half, std::span<double> out, const Extents& ext)
    {
        if (out.size() != ext.size() || half.size() != half_spectrum_size(ext))
        {
            throw SpecMismatch("fft::inverse_real: buffer sizes do not match extents");
        }
        auto* src = reinterpret_cast<fftw_complex*>(half.data());
        const bool aligned = fftw_alignment_of(reinterpret_cast<double*>(src)) == 0 && fftw_alignment_of(out.data()) == 0;
        fftw_plan plan = detail::plan_cache().get_real(ext, Direction::inverse, aligned);
        fftw_execute_dft_c2r(plan, src, out.data());
    }

} // namespace bandreg::fft
