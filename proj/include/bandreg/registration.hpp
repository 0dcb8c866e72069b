#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "bandreg/shooting_kernel.hpp"

namespace bandreg
{
    struct RegConfig
    {
        double gamma = 1.0;     // image-match weight
        double alpha = 3.0;     // operator weight
        int power = 6;          // operator power c
        int dim = 2;
        int band = 16;
        int grid = 100;
        int steps = 10;         // Euler steps per unit time
        int max_iters = 200;
        double step_size = 0.1; // initial trial step of the descent
        double tol = 1e-6;      // relative energy decrease that stops the descent
        double fd_eps = 1e-4;
        bool reject_folding = true; // line search refuses steps with min DetJac <= 0
        std::uint64_t seed = 0;

        BandSpec band_spec() const { return BandSpec::uniform(dim, band, grid); }
        Extents grid_extents() const { return Extents::uniform(dim, grid); }

        void validate() const
        {
            if (!(gamma > 0.0) || !(alpha > 0.0) || power < 1 || steps < 1 || max_iters < 1 ||
                !(step_size > 0.0) || !(fd_eps > 0.0))
            {
                throw std::invalid_argument("RegConfig: parameters must be positive");
            }
            if (!(tol > 0.0 && tol < 1.0))
            {
                throw std::invalid_argument("RegConfig: tol must lie in (0, 1)");
            }
            (void)band_spec();
        }
    };

    struct RegResult
    {
        FreqVectorField v_opt;
        std::vector<double> energy_trace;
        double initial_ssd = 0.0;
        double final_ssd = 0.0;
        double min_detjac = 1.0;
        int iterations = 0;
        bool backtracking_exhausted = false;
    };

    /// Terms of the shooting energy at one initial velocity.
    struct EnergyTerms
    {
        double matching = 0.0;    // gamma/2 * mean SSD(S o psi_1, T)
        double regularity = 0.0;  // 1/2 Re <L v0, v0>
        double ssd = 0.0;         // mean SSD

        double total() const { return matching + regularity; }
    };

    /// 1/2 sum over all coefficients of L(xi) |v(xi)|^2.
    inline double regularity_term(const FreqVectorField& v0, const SmoothingOperator& op)
    {
        require_same(v0.spec(), op.spec(), "regularity_term");
        const auto l = op.lcoeffs();
        double s = 0.0;
        for (int j = 0; j < v0.dim(); ++j)
        {
            for (std::size_t i = 0; i < l.size(); ++i)
            {
                s += l[i] * std::norm(v0[j][i]);
            }
        }
        return 0.5 * s;
    }

    /// Deformation psi_1 reached by shooting from v0.
    inline DeformationField shoot_deformation(const FreqVectorField& v0, const SmoothingOperator& op, int steps,
                                              const Extents& grid)
    {
        ShootingKernel kernel(op, steps);
        return kernel.deformation(v0, grid);
    }

    /// Repeated energy evaluation for one image pair; owns a shooting kernel,
    /// so one evaluator per thread.
    class EnergyEvaluator
    {
    public:
        EnergyEvaluator(const SpatialImage& S, const SpatialImage& T, const SmoothingOperator& op,
                        const RegConfig& cfg)
            : S_(S), T_(T), op_(op), gamma_(cfg.gamma), kernel_(op, cfg.steps)
        {
            if (!(S.extents() == T.extents()) || !(S.extents() == op.spec().grid_extents()))
            {
                throw SpecMismatch("energy: images must share the configured grid");
            }
        }

        EnergyTerms terms(const FreqVectorField& v0)
        {
            const auto psi = kernel_.deformation(v0, S_.extents());
            return terms(v0, psi);
        }

        EnergyTerms terms(const FreqVectorField& v0, const DeformationField& psi)
        {
            EnergyTerms e;
            e.ssd = mean_ssd(warp(S_, psi), T_);
            e.matching = 0.5 * gamma_ * e.ssd;
            e.regularity = regularity_term(v0, op_);
            if (!std::isfinite(e.total()))
            {
                throw DivergedError("energy is not finite", kernel_.steps());
            }
            return e;
        }

        double operator()(const FreqVectorField& v0) { return terms(v0).total(); }

        DeformationField deformation(const FreqVectorField& v0) { return kernel_.deformation(v0, S_.extents()); }

        const SmoothingOperator& op() const { return op_; }

    private:
        const SpatialImage& S_;
        const SpatialImage& T_;
        SmoothingOperator op_;
        double gamma_;
        ShootingKernel kernel_;
    };

    inline EnergyTerms energy_terms(const FreqVectorField& v0, const SpatialImage& S, const SpatialImage& T,
                                    const SmoothingOperator& op, const RegConfig& cfg)
    {
        EnergyEvaluator eval(S, T, op, cfg);
        return eval.terms(v0);
    }

    inline double energy(const FreqVectorField& v0, const SpatialImage& S, const SpatialImage& T,
                         const SmoothingOperator& op, const RegConfig& cfg)
    {
        return energy_terms(v0, S, T, op, cfg).total();
    }

    inline double energy(const FreqVectorField& v0, const SpatialImage& S, const SpatialImage& T,
                         const RegConfig& cfg)
    {
        return energy(v0, S, T, make_operator(cfg.alpha, cfg.power, v0.spec()), cfg);
    }

    /// Independent real coordinates of a Hermitian vector spectrum: for every
    /// conjugate pair (xi, -xi) only the lexicographically positive member is kept
    /// (real and imaginary part); the DC coefficient contributes its real part.
    class HermitianCoordinates
    {
    public:
        struct Entry
        {
            int component;
            std::size_t flat;
            std::size_t mirror;
            bool imaginary;
            bool self_conjugate;
        };

        explicit HermitianCoordinates(const BandSpec& spec) : spec_(spec)
        {
            for (int j = 0; j < spec.dim; ++j)
            {
                for_each_index(spec.band_extents(), [&](const std::array<int, 3>& b, std::size_t flat) {
                    if (!spec.is_retained(b))
                    {
                        return;
                    }
                    const auto xi = spec.freqs(b);
                    if (xi == std::array<int, 3>{0, 0, 0})
                    {
                        entries_.push_back({j, flat, flat, false, true});
                        return;
                    }
                    if (xi > std::array<int, 3>{0, 0, 0})
                    {
                        const auto m = spec.mirror(b);
                        entries_.push_back({j, flat, m, false, false});
                        entries_.push_back({j, flat, m, true, false});
                    }
                });
            }
        }

        std::size_t size() const { return entries_.size(); }
        const Entry& operator[](std::size_t i) const { return entries_[i]; }
        const BandSpec& spec() const { return spec_; }

        /// Adds delta to coordinate i, keeping the conjugate partner consistent.
        void perturb(FreqVectorField& v, std::size_t i, double delta) const
        {
            const auto& e = entries_[i];
            auto& f = v[e.component];
            if (e.self_conjugate)
            {
                f[e.flat] += delta;
                return;
            }
            const cplx step = e.imaginary ? cplx(0.0, delta) : cplx(delta, 0.0);
            f[e.flat] += step;
            f[e.mirror] += std::conj(step);
        }

        /// Maps partial derivatives with respect to the coordinates to the
        /// spectrum g for which dE = Re <g, h> over all coefficients. For the
        /// quadratic form 1/2 Re <L v, v> this yields g = L v.
        FreqVectorField assemble_gradient(const std::vector<double>& partials) const
        {
            FreqVectorField g(spec_);
            for (std::size_t i = 0; i < entries_.size(); ++i)
            {
                const auto& e = entries_[i];
                auto& f = g[e.component];
                if (e.self_conjugate)
                {
                    f[e.flat] += partials[i];
                    continue;
                }
                const cplx half = e.imaginary ? cplx(0.0, 0.5 * partials[i]) : cplx(0.5 * partials[i], 0.0);
                f[e.flat] += half;
                f[e.mirror] += std::conj(half);
            }
            return g;
        }

    private:
        BandSpec spec_;
        std::vector<Entry> entries_;
    };

    /// Central finite differences of the energy on the Hermitian coordinates.
    template <class EnergyFn>
    FreqVectorField gradient_fd(const FreqVectorField& v0, double fd_eps, EnergyFn&& fn)
    {
        if (!(fd_eps > 0.0))
        {
            throw std::invalid_argument("gradient_fd: fd_eps must be positive");
        }
        const HermitianCoordinates coords(v0.spec());
        std::vector<double> partials(coords.size());
        FreqVectorField probe = v0;
        for (std::size_t i = 0; i < coords.size(); ++i)
        {
            coords.perturb(probe, i, fd_eps);
            const double ep = fn(probe);
            coords.perturb(probe, i, -2.0 * fd_eps);
            const double em = fn(probe);
            // restore exactly; repeated +/- eps would accumulate rounding
            const auto& e = coords[i];
            probe[e.component][e.flat] = v0[e.component][e.flat];
            probe[e.component][e.mirror] = v0[e.component][e.mirror];
            partials[i] = (ep - em) / (2.0 * fd_eps);
        }
        return coords.assemble_gradient(partials);
    }

    inline FreqVectorField gradient_fd(const FreqVectorField& v0, const SpatialImage& S, const SpatialImage& T,
                                       const RegConfig& cfg)
    {
        EnergyEvaluator eval(S, T, make_operator(cfg.alpha, cfg.power, v0.spec()), cfg);
        return gradient_fd(v0, cfg.fd_eps, eval);
    }

    /// Safeguarded gradient descent on the shooting energy from v0 = 0.
    ///
    /// The search direction is the K-smoothed gradient -K g (the gradient in the
    /// metric of the velocity space). Each iteration first tries a Barzilai-Borwein
    /// step measured in that metric (step_size on the first iteration), then halves
    /// it until the energy decreases, at most 30 times.
    inline RegResult register_pair(const SpatialImage& S, const SpatialImage& T, const RegConfig& cfg)
    {
        cfg.validate();
        const auto spec = cfg.band_spec();
        if (!(S.extents() == spec.grid_extents()) || !(T.extents() == spec.grid_extents()))
        {
            throw SpecMismatch("register_pair: images must match the configured grid");
        }
        const auto op = make_operator(cfg.alpha, cfg.power, spec);
        EnergyEvaluator energy_at(S, T, op, cfg);

        RegResult result;
        FreqVectorField v(spec);
        double e = energy_at(v);
        result.energy_trace.push_back(e);
        result.initial_ssd = mean_ssd(S, T);
        double step = cfg.step_size;
        constexpr int max_halvings = 30;
        FreqVectorField prev_v, prev_g;

        for (int it = 0; it < cfg.max_iters && e > 0.0; ++it)
        {
            const auto g = gradient_fd(v, cfg.fd_eps, energy_at);
            const auto dir = apply_K(op, g);
            const double slope = real_inner(g, dir);
            if (!(slope > 0.0))
            {
                break;
            }
            if (it > 0)
            {
                const auto sv = v - prev_v;
                const auto yv = g - prev_g;
                const double sy = real_inner(sv, yv);
                const double sls = real_inner(sv, apply_L(op, sv));
                if (sy > 0.0 && std::isfinite(sls / sy))
                {
                    step = sls / sy;
                }
            }
            bool accepted = false;
            FreqVectorField trial;
            double e_trial = e;
            for (int h = 0; h <= max_halvings; ++h)
            {
                trial = v;
                trial.axpy(-step, dir);
                try
                {
                    const auto psi = energy_at.deformation(trial);
                    e_trial = energy_at.terms(trial, psi).total();
                    if (cfg.reject_folding && min_value(det_jacobian(psi)) <= 0.0)
                    {
                        e_trial = std::numeric_limits<double>::infinity();
                    }
                }
                catch (const DivergedError&)
                {
                    e_trial = std::numeric_limits<double>::infinity();
                }
                if (e_trial < e)
                {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            result.iterations = it + 1;
            if (!accepted)
            {
                result.backtracking_exhausted = true;
                break;
            }
            const double rel = (e - e_trial) / e;
            prev_v = std::move(v);
            prev_g = g;
            v = std::move(trial);
            e = e_trial;
            result.energy_trace.push_back(e);
            if (rel < cfg.tol)
            {
                break;
            }
        }

        const auto psi = energy_at.deformation(v);
        result.final_ssd = mean_ssd(warp(S, psi), T);
        result.min_detjac = min_value(det_jacobian(psi));
        result.v_opt = std::move(v);
        return result;
    }

} // namespace bandreg
