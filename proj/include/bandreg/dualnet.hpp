#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>
#include <numeric>
#include <random>
#include <vector>

#include "bandreg/registration.hpp"

namespace bandreg
{
    // Dual real-valued network over truncated spectra.
    //
    // A convolution with a real kernel H acts on a complex input X as
    // H*Re(X) + i H*Im(X), and the complex ReLU acts on each plane separately,
    // so a complex CNN with real kernels splits into two real CNNs: R_net on the
    // real planes and I_net on the imaginary planes. The squared-error loss splits
    // the same way, |(p + iq) - (m + in)|^2 = |p - m|^2 + |q - n|^2, so the two
    // sub-networks train independently.

    struct LayerSpec
    {
        int in_channels = 1;
        int out_channels = 1;
        int kernel = 3;   // odd; h^d taps, zero "same" padding of kernel/2
        int stride = 1;
        bool activation = true; // CReLU after this layer

        friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
    };

    struct Architecture
    {
        int dim = 2;
        std::vector<LayerSpec> layers;

        /// 2 -> 16 -> 32 -> 32 -> d, 3^d kernels, CReLU between layers.
        static Architecture standard(int dim)
        {
            return {dim,
                    {{2, 16, 3, 1, true}, {16, 32, 3, 1, true}, {32, 32, 3, 1, true}, {32, dim, 3, 1, false}}};
        }

        static Architecture two_layer(int dim, int hidden, int kernel = 3)
        {
            return {dim, {{2, hidden, kernel, 1, true}, {hidden, dim, kernel, 1, false}}};
        }

        void validate() const
        {
            if (dim != 2 && dim != 3)
            {
                throw std::invalid_argument("Architecture: dim must be 2 or 3");
            }
            if (layers.empty())
            {
                throw std::invalid_argument("Architecture: no layers");
            }
            if (layers.front().in_channels != 2)
            {
                throw std::invalid_argument("Architecture: first layer must take 2 channels (source, target)");
            }
            if (layers.back().out_channels != dim)
            {
                throw std::invalid_argument("Architecture: last layer must emit dim channels");
            }
            for (std::size_t p = 0; p < layers.size(); ++p)
            {
                const auto& l = layers[p];
                if (l.in_channels < 1 || l.out_channels < 1 || l.kernel < 1 || l.kernel % 2 == 0 || l.stride < 1)
                {
                    throw std::invalid_argument("Architecture: invalid layer " + std::to_string(p));
                }
                if (p > 0 && layers[p - 1].out_channels != l.in_channels)
                {
                    throw std::invalid_argument("Architecture: channel counts do not chain at layer " +
                                                std::to_string(p));
                }
            }
        }

        std::size_t taps(const LayerSpec& l) const
        {
            std::size_t t = 1;
            for (int k = 0; k < dim; ++k)
            {
                t *= l.kernel;
            }
            return t;
        }

        friend bool operator==(const Architecture&, const Architecture&) = default;
    };

    /// Kernel stored [out][in][tap], taps row-major over the h^d window.
    struct ConvLayer
    {
        std::vector<double> kernel;
        std::vector<double> bias;

        friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
    };

    using RealNet = std::vector<ConvLayer>;

    struct DualNetWeights
    {
        Architecture arch;
        bool tie_weights = false; // I_net shares R_net's parameters
        RealNet r_net;
        RealNet i_net;            // empty when tied

        const RealNet& imag_net() const { return tie_weights ? r_net : i_net; }

        /// Zero-valued weights of the given shape.
        static DualNetWeights zeros(const Architecture& arch, bool tie)
        {
            arch.validate();
            DualNetWeights w;
            w.arch = arch;
            w.tie_weights = tie;
            for (const auto& l : arch.layers)
            {
                w.r_net.push_back({std::vector<double>(l.out_channels * l.in_channels * arch.taps(l), 0.0),
                                   std::vector<double>(l.out_channels, 0.0)});
            }
            if (!tie)
            {
                w.i_net = w.r_net;
            }
            return w;
        }

        /// Kernels uniform in [-k, k], k = 1/sqrt(fan_in); biases zero.
        static DualNetWeights init(const Architecture& arch, std::uint64_t seed, bool tie = false)
        {
            auto w = zeros(arch, tie);
            std::mt19937_64 rng(seed);
            auto fill = [&](RealNet& net) {
                for (std::size_t p = 0; p < net.size(); ++p)
                {
                    const auto& l = arch.layers[p];
                    const double k = 1.0 / std::sqrt(static_cast<double>(l.in_channels * arch.taps(l)));
                    std::uniform_real_distribution<double> dist(-k, k);
                    for (auto& x : net[p].kernel)
                    {
                        x = dist(rng);
                    }
                }
            };
            fill(w.r_net);
            if (!tie)
            {
                fill(w.i_net);
            }
            return w;
        }

        std::size_t parameter_count() const
        {
            std::size_t n = 0;
            for (const auto* net : {&r_net, &i_net})
            {
                for (const auto& l : *net)
                {
                    n += l.kernel.size() + l.bias.size();
                }
            }
            return n;
        }

        /// Applies f(double&) to every parameter, R_net first.
        template <class F>
        void for_each_parameter(F&& f)
        {
            for (auto* net : {&r_net, &i_net})
            {
                for (auto& l : *net)
                {
                    for (auto& x : l.kernel)
                    {
                        f(x);
                    }
                    for (auto& x : l.bias)
                    {
                        f(x);
                    }
                }
            }
        }

        friend bool operator==(const DualNetWeights&, const DualNetWeights&) = default;
    };

    /// Real multichannel map over a 2D/3D lattice, stored [channel][position].
    struct FeatureMap
    {
        int channels = 0;
        Extents extents;
        std::vector<double> data;

        FeatureMap() = default;
        FeatureMap(int c, const Extents& ext) : channels(c), extents(ext), data(c * ext.size(), 0.0) {}

        std::span<double> channel(int c) { return {data.data() + c * extents.size(), extents.size()}; }
        std::span<const double> channel(int c) const { return {data.data() + c * extents.size(), extents.size()}; }
    };

    /// Complex multichannel map: the two real planes kept side by side.
    struct ComplexFeatureMap
    {
        FeatureMap re;
        FeatureMap im;
    };

    namespace detail
    {
        inline Extents conv_output_extents(const Extents& in, int stride)
        {
            std::array<int, 3> n{1, 1, 1};
            for (int k = 0; k < in.dim; ++k)
            {
                n[k] = (in.n[k] + stride - 1) / stride;
            }
            return Extents(in.dim, n);
        }

        /// For every tap offset and every output position whose input position lies
        /// inside the map, calls f(tap, out_flat, in_flat).
        template <class F>
        void for_each_tap(const Extents& in, const Extents& out, const LayerSpec& l, F&& f)
        {
            const int pad = l.kernel / 2;
            const int d = in.dim;
            const std::array<int, 3> kext{l.kernel, l.kernel, d == 3 ? l.kernel : 1};
            std::size_t tap = 0;
            for (int t0 = 0; t0 < kext[0]; ++t0)
            {
                for (int t1 = 0; t1 < kext[1]; ++t1)
                {
                    for (int t2 = 0; t2 < kext[2]; ++t2, ++tap)
                    {
                        const std::array<int, 3> t{t0, t1, t2};
                        std::array<int, 3> lo{0, 0, 0}, hi{1, 1, 1}, off{0, 0, 0};
                        for (int k = 0; k < d; ++k)
                        {
                            off[k] = t[k] - pad;
                            // 0 <= o * stride + off < n
                            int a = 0;
                            while (a < out.n[k] && a * l.stride + off[k] < 0)
                            {
                                ++a;
                            }
                            int b = out.n[k];
                            while (b > a && (b - 1) * l.stride + off[k] >= in.n[k])
                            {
                                --b;
                            }
                            lo[k] = a;
                            hi[k] = b;
                        }
                        for (int o0 = lo[0]; o0 < hi[0]; ++o0)
                        {
                            for (int o1 = lo[1]; o1 < hi[1]; ++o1)
                            {
                                for (int o2 = lo[2]; o2 < hi[2]; ++o2)
                                {
                                    const std::size_t of = out.index(o0, o1, o2);
                                    const std::size_t inf =
                                        in.index(o0 * l.stride + off[0], d > 1 ? o1 * l.stride + off[1] : 0,
                                                 d > 2 ? o2 * l.stride + off[2] : 0);
                                    f(tap, of, inf);
                                }
                            }
                        }
                    }
                }
            }
        }

        /// Input offset of every (tap, output position), -1 where the window hits
        /// the zero padding. Cached per geometry and thread.
        inline const std::vector<std::int64_t>& tap_table(const Extents& in, const LayerSpec& l)
        {
            using Key = std::tuple<int, int, int, int, int, int>;
            thread_local std::map<Key, std::vector<std::int64_t>> cache;
            const Key key{in.dim, in.n[0], in.n[1], in.n[2], l.kernel, l.stride};
            if (auto it = cache.find(key); it != cache.end())
            {
                return it->second;
            }
            const auto out = conv_output_extents(in, l.stride);
            std::size_t taps = 1;
            for (int k = 0; k < in.dim; ++k)
            {
                taps *= l.kernel;
            }
            std::vector<std::int64_t> table(taps * out.size(), -1);
            for_each_tap(in, out, l, [&](std::size_t t, std::size_t of, std::size_t inf) {
                table[t * out.size() + of] = static_cast<std::int64_t>(inf);
            });
            return cache.emplace(key, std::move(table)).first->second;
        }

        /// Column matrix [in_channel * taps][out position] of a feature map.
        inline std::vector<double> im2col(const FeatureMap& x, const LayerSpec& l, std::size_t taps,
                                          std::size_t n_out)
        {
            const auto& table = tap_table(x.extents, l);
            const std::size_t n_in = x.extents.size();
            std::vector<double> cols(static_cast<std::size_t>(l.in_channels) * taps * n_out, 0.0);
            for (int ic = 0; ic < l.in_channels; ++ic)
            {
                const double* xi = x.data.data() + ic * n_in;
                for (std::size_t t = 0; t < taps; ++t)
                {
                    double* row = cols.data() + (ic * taps + t) * n_out;
                    const std::int64_t* idx = table.data() + t * n_out;
                    for (std::size_t o = 0; o < n_out; ++o)
                    {
                        if (idx[o] >= 0)
                        {
                            row[o] = xi[idx[o]];
                        }
                    }
                }
            }
            return cols;
        }

        inline FeatureMap conv_from_cols(const std::vector<double>& cols, const ConvLayer& w, const LayerSpec& l,
                                         std::size_t taps, const Extents& out_ext)
        {
            FeatureMap y(l.out_channels, out_ext);
            const std::size_t n_out = out_ext.size();
            const std::size_t rows = static_cast<std::size_t>(l.in_channels) * taps;
            for (int oc = 0; oc < l.out_channels; ++oc)
            {
                double* yo = y.data.data() + oc * n_out;
                std::fill(yo, yo + n_out, w.bias[oc]);
                const double* k = w.kernel.data() + oc * rows;
                for (std::size_t r = 0; r < rows; ++r)
                {
                    const double kr = k[r];
                    const double* c = cols.data() + r * n_out;
                    for (std::size_t o = 0; o < n_out; ++o)
                    {
                        yo[o] += kr * c[o];
                    }
                }
            }
            return y;
        }
    } // namespace detail

    /// Real convolution (cross-correlation form) plus bias.
    inline FeatureMap conv_forward(const FeatureMap& x, const ConvLayer& w, const LayerSpec& l, std::size_t taps)
    {
        if (x.channels != l.in_channels)
        {
            throw SpecMismatch("conv_forward: input channel count mismatch");
        }
        const auto out_ext = detail::conv_output_extents(x.extents, l.stride);
        return detail::conv_from_cols(detail::im2col(x, l, taps, out_ext.size()), w, l, taps, out_ext);
    }

    /// Convolution of a complex input with a real kernel: the same kernel runs on
    /// the real and the imaginary plane. No bias.
    inline ComplexFeatureMap complex_conv(const ComplexFeatureMap& x, const std::vector<double>& kernel,
                                          const LayerSpec& l, std::size_t taps)
    {
        if (!(x.re.extents == x.im.extents) || x.re.channels != x.im.channels)
        {
            throw SpecMismatch("complex_conv: real and imaginary planes differ in shape");
        }
        if (kernel.size() != static_cast<std::size_t>(l.out_channels * l.in_channels) * taps)
        {
            throw SpecMismatch("complex_conv: kernel size does not match layer");
        }
        const ConvLayer layer{kernel, std::vector<double>(l.out_channels, 0.0)};
        return {conv_forward(x.re, layer, l, taps), conv_forward(x.im, layer, l, taps)};
    }

    inline void relu_inplace(FeatureMap& y)
    {
        for (auto& v : y.data)
        {
            v = std::max(v, 0.0);
        }
    }

    /// ReLU on each plane.
    inline ComplexFeatureMap crelu(ComplexFeatureMap y)
    {
        relu_inplace(y.re);
        relu_inplace(y.im);
        return y;
    }

    inline cplx crelu(cplx z) { return {std::max(z.real(), 0.0), std::max(z.imag(), 0.0)}; }

    /// Per-layer activations kept for the backward pass.
    struct NetTrace
    {
        std::vector<Extents> in_extents;
        std::vector<std::vector<double>> cols; // im2col of the input of layer p
        std::vector<FeatureMap> preacts;       // conv output of layer p before activation
    };

    inline FeatureMap run_net(const RealNet& net, const Architecture& arch, FeatureMap x, NetTrace* trace = nullptr)
    {
        for (std::size_t p = 0; p < arch.layers.size(); ++p)
        {
            const auto& l = arch.layers[p];
            if (x.channels != l.in_channels)
            {
                throw SpecMismatch("run_net: input channel count mismatch");
            }
            const std::size_t taps = arch.taps(l);
            const auto out_ext = detail::conv_output_extents(x.extents, l.stride);
            auto cols = detail::im2col(x, l, taps, out_ext.size());
            auto y = detail::conv_from_cols(cols, net[p], l, taps, out_ext);
            if (trace != nullptr)
            {
                trace->in_extents.push_back(x.extents);
                trace->cols.push_back(std::move(cols));
                trace->preacts.push_back(y);
            }
            if (l.activation)
            {
                relu_inplace(y);
            }
            x = std::move(y);
        }
        return x;
    }

    /// Gradient of sum(g_out * net(x)) w.r.t. the layer parameters, accumulated into grad.
    inline void backprop_net(const RealNet& net, const Architecture& arch, const NetTrace& trace, FeatureMap g,
                             RealNet& grad)
    {
        for (std::size_t pp = arch.layers.size(); pp-- > 0;)
        {
            const auto& l = arch.layers[pp];
            const std::size_t taps = arch.taps(l);
            const auto& pre = trace.preacts[pp];
            const auto& cols = trace.cols[pp];
            if (l.activation)
            {
                for (std::size_t i = 0; i < g.data.size(); ++i)
                {
                    if (pre.data[i] <= 0.0)
                    {
                        g.data[i] = 0.0;
                    }
                }
            }
            const std::size_t n_out = pre.extents.size();
            const std::size_t rows = static_cast<std::size_t>(l.in_channels) * taps;
            auto& gl = grad[pp];
            const bool need_input_grad = pp > 0;
            std::vector<double> gcols(need_input_grad ? rows * n_out : 0, 0.0);
            for (int oc = 0; oc < l.out_channels; ++oc)
            {
                const double* go = g.data.data() + oc * n_out;
                gl.bias[oc] += std::accumulate(go, go + n_out, 0.0);
                const double* k = net[pp].kernel.data() + oc * rows;
                double* gk = gl.kernel.data() + oc * rows;
                for (std::size_t r = 0; r < rows; ++r)
                {
                    const double* c = cols.data() + r * n_out;
                    double acc = 0.0;
                    for (std::size_t o = 0; o < n_out; ++o)
                    {
                        acc += go[o] * c[o];
                    }
                    gk[r] += acc;
                    if (need_input_grad)
                    {
                        const double kr = k[r];
                        double* gc = gcols.data() + r * n_out;
                        for (std::size_t o = 0; o < n_out; ++o)
                        {
                            gc[o] += kr * go[o];
                        }
                    }
                }
            }
            if (!need_input_grad)
            {
                break;
            }
            const auto& in_ext = trace.in_extents[pp];
            const auto& table = detail::tap_table(in_ext, l);
            FeatureMap gx(l.in_channels, in_ext);
            const std::size_t n_in = in_ext.size();
            for (int ic = 0; ic < l.in_channels; ++ic)
            {
                double* gxi = gx.data.data() + ic * n_in;
                for (std::size_t t = 0; t < taps; ++t)
                {
                    const double* gc = gcols.data() + (ic * taps + t) * n_out;
                    const std::int64_t* idx = table.data() + t * n_out;
                    for (std::size_t o = 0; o < n_out; ++o)
                    {
                        if (idx[o] >= 0)
                        {
                            gxi[idx[o]] += gc[o];
                        }
                    }
                }
            }
            g = std::move(gx);
        }
    }

    /// Source/target spectra and the optimal initial velocity for one pair.
    struct TrainingExample
    {
        FreqScalarField s_freq;
        FreqScalarField t_freq;
        FreqVectorField v_opt;
    };

    namespace detail
    {
        inline FeatureMap stack_planes(const FreqScalarField& s, const FreqScalarField& t, bool imaginary)
        {
            require_same(s.spec(), t.spec(), "dualnet input");
            FeatureMap x(2, s.spec().band_extents());
            auto a = x.channel(0);
            auto b = x.channel(1);
            for (std::size_t i = 0; i < s.size(); ++i)
            {
                a[i] = imaginary ? s[i].imag() : s[i].real();
                b[i] = imaginary ? t[i].imag() : t[i].real();
            }
            return x;
        }

        inline void check_weights(const DualNetWeights& w, const BandSpec& spec)
        {
            w.arch.validate();
            if (w.arch.dim != spec.dim)
            {
                throw SpecMismatch("dualnet: architecture dimension differs from band dimension");
            }
            if (w.r_net.size() != w.arch.layers.size() || w.imag_net().size() != w.arch.layers.size())
            {
                throw SpecMismatch("dualnet: weights do not match architecture");
            }
            for (const auto& l : w.arch.layers)
            {
                if (l.stride != 1)
                {
                    throw SpecMismatch("dualnet: output must stay on the band lattice (stride 1 only)");
                }
            }
        }
    } // namespace detail

    /// Forward pass with the traces needed by backward.
    struct ForwardState
    {
        NetTrace r_trace;
        NetTrace i_trace;
        FreqVectorField v_pre;
    };

    inline ForwardState forward_traced(const FreqScalarField& s_freq, const FreqScalarField& t_freq,
                                       const DualNetWeights& w)
    {
        const auto& spec = s_freq.spec();
        detail::check_weights(w, spec);
        ForwardState st;
        const auto out_r = run_net(w.r_net, w.arch, detail::stack_planes(s_freq, t_freq, false), &st.r_trace);
        const auto out_i = run_net(w.imag_net(), w.arch, detail::stack_planes(s_freq, t_freq, true), &st.i_trace);
        FreqVectorField raw(spec);
        for (int j = 0; j < spec.dim; ++j)
        {
            const auto re = out_r.channel(j);
            const auto im = out_i.channel(j);
            for (std::size_t i = 0; i < spec.size(); ++i)
            {
                raw[j][i] = cplx(re[i], im[i]);
            }
        }
        // Hermitian symmetrization keeps decoded velocities real; its real part
        // depends on R_net only and its imaginary part on I_net only.
        st.v_pre = hermitian_part(raw);
        return st;
    }

    /// Predicted initial velocity spectrum.
    inline FreqVectorField forward(const TrainingExample& ex, const DualNetWeights& w)
    {
        require_same(ex.s_freq.spec(), ex.t_freq.spec(), "forward");
        return forward_traced(ex.s_freq, ex.t_freq, w).v_pre;
    }

    struct TrainConfig
    {
        double lambda = 1e-4;
        double lr = 1e-4;
        int batch = 64;
        int epochs = 2000;
        std::uint64_t seed = 0;
        bool momentum = false; // momentum-SGD (0.9) instead of plain SGD
        double momentum_coeff = 0.9;
        bool tie_weights = false;
        Architecture arch = Architecture::standard(2);

        void validate() const
        {
            if (!(lambda >= 0.0) || !(lr > 0.0) || batch < 1 || epochs < 0)
            {
                throw std::invalid_argument("TrainConfig: need lambda >= 0, lr > 0, batch >= 1, epochs >= 0");
            }
            arch.validate();
        }
    };

    /// Squared L2 norm of every kernel entry (biases excluded), counting tied kernels once.
    inline double weight_regularizer(const DualNetWeights& w)
    {
        double s = 0.0;
        for (const auto* net : {&w.r_net, &w.i_net})
        {
            for (const auto& l : *net)
            {
                for (double x : l.kernel)
                {
                    s += x * x;
                }
            }
        }
        return s;
    }

    /// Squared distance evaluated as the real-plane plus the imaginary-plane sum.
    inline double decoupled_sq_distance(const FreqVectorField& a, const FreqVectorField& b)
    {
        require_same(a.spec(), b.spec(), "decoupled_sq_distance");
        double re = 0.0;
        double im = 0.0;
        for (int j = 0; j < a.dim(); ++j)
        {
            for (std::size_t i = 0; i < a[j].size(); ++i)
            {
                const double dr = a[j][i].real() - b[j][i].real();
                const double di = a[j][i].imag() - b[j][i].imag();
                re += dr * dr;
                im += di * di;
            }
        }
        return re + im;
    }

    /// sum_n |v_opt - v_pre|^2 + lambda * Reg(W).
    inline double loss(std::span<const TrainingExample> batch, const DualNetWeights& w, const TrainConfig& cfg)
    {
        if (batch.empty())
        {
            throw std::invalid_argument("loss: empty batch");
        }
        double s = 0.0;
        for (const auto& ex : batch)
        {
            s += decoupled_sq_distance(ex.v_opt, forward(ex, w));
        }
        return s + cfg.lambda * weight_regularizer(w);
    }

    /// Exact gradient of loss() by reverse mode through conv, bias, CReLU and the
    /// output symmetrization. R_net and I_net gradients are independent; tied
    /// weights receive the sum of both.
    inline DualNetWeights backward(std::span<const TrainingExample> batch, const DualNetWeights& w,
                                   const TrainConfig& cfg, double* loss_out = nullptr)
    {
        if (batch.empty())
        {
            throw std::invalid_argument("backward: empty batch");
        }
        auto grad = DualNetWeights::zeros(w.arch, w.tie_weights);
        double total = 0.0;
        for (const auto& ex : batch)
        {
            const auto st = forward_traced(ex.s_freq, ex.t_freq, w);
            const auto& spec = st.v_pre.spec();
            if (!(ex.v_opt.spec() == spec))
            {
                throw SpecMismatch("backward: label band differs from input band");
            }
            total += decoupled_sq_distance(ex.v_opt, st.v_pre);
            // dL/d raw through the symmetrization y = (x(xi) + conj x(-xi)) / 2,
            // whose adjoint on each plane is again a (skew-)symmetric average.
            FeatureMap gr(spec.dim, spec.band_extents());
            FeatureMap gi(spec.dim, spec.band_extents());
            for (int j = 0; j < spec.dim; ++j)
            {
                auto gre = gr.channel(j);
                auto gim = gi.channel(j);
                for_each_index(spec.band_extents(), [&](const std::array<int, 3>& b, std::size_t flat) {
                    if (!spec.is_retained(b))
                    {
                        return;
                    }
                    const std::size_t m = spec.mirror(b);
                    const cplx d_here = 2.0 * (st.v_pre[j][flat] - ex.v_opt[j][flat]);
                    const cplx d_mirror = 2.0 * (st.v_pre[j][m] - ex.v_opt[j][m]);
                    gre[flat] = 0.5 * (d_here.real() + d_mirror.real());
                    gim[flat] = 0.5 * (d_here.imag() - d_mirror.imag());
                });
            }
            backprop_net(w.r_net, w.arch, st.r_trace, std::move(gr), grad.r_net);
            backprop_net(w.imag_net(), w.arch, st.i_trace, std::move(gi), w.tie_weights ? grad.r_net : grad.i_net);
        }
        if (cfg.lambda != 0.0)
        {
            auto add_reg = [&](const RealNet& net, RealNet& g) {
                for (std::size_t p = 0; p < net.size(); ++p)
                {
                    for (std::size_t i = 0; i < net[p].kernel.size(); ++i)
                    {
                        g[p].kernel[i] += 2.0 * cfg.lambda * net[p].kernel[i];
                    }
                }
            };
            add_reg(w.r_net, grad.r_net);
            if (!w.tie_weights)
            {
                add_reg(w.i_net, grad.i_net);
            }
        }
        if (loss_out != nullptr)
        {
            *loss_out = total + cfg.lambda * weight_regularizer(w);
        }
        return grad;
    }

    struct TrainResult
    {
        DualNetWeights weights;
        std::vector<double> train_loss; // per epoch: mean per-example data loss over its mini-batches
        std::vector<double> val_loss;   // per epoch: mean per-example data loss after the epoch
    };

    class TrainingDiverged : public std::runtime_error
    {
    public:
        TrainingDiverged(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
        int epoch() const { return epoch_; }

    private:
        int epoch_;
    };

    /// Mini-batch SGD with seeded shuffling; deterministic for a fixed seed.
    inline TrainResult train(std::span<const TrainingExample> train_set, std::span<const TrainingExample> val_set,
                             const TrainConfig& cfg)
    {
        cfg.validate();
        if (train_set.empty())
        {
            throw std::invalid_argument("train: empty training set");
        }
        TrainResult result;
        result.weights = DualNetWeights::init(cfg.arch, cfg.seed, cfg.tie_weights);
        auto& w = result.weights;
        auto velocity = DualNetWeights::zeros(cfg.arch, cfg.tie_weights);
        std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
        std::vector<std::size_t> order(train_set.size());
        std::iota(order.begin(), order.end(), 0);
        std::vector<TrainingExample> batch;

        auto mean_data_loss = [&](std::span<const TrainingExample> set) {
            double s = 0.0;
            for (const auto& ex : set)
            {
                s += decoupled_sq_distance(ex.v_opt, forward(ex, w));
            }
            return s / static_cast<double>(set.size());
        };

        for (int epoch = 0; epoch < cfg.epochs; ++epoch)
        {
            std::shuffle(order.begin(), order.end(), rng);
            double epoch_loss = 0.0;
            for (std::size_t start = 0; start < order.size(); start += cfg.batch)
            {
                const std::size_t stop = std::min(order.size(), start + cfg.batch);
                batch.clear();
                for (std::size_t i = start; i < stop; ++i)
                {
                    batch.push_back(train_set[order[i]]);
                }
                double batch_loss = 0.0;
                auto grad = backward(batch, w, cfg, &batch_loss);
                if (!std::isfinite(batch_loss))
                {
                    throw TrainingDiverged("training loss became non-finite at epoch " + std::to_string(epoch + 1),
                                           epoch + 1);
                }
                epoch_loss += batch_loss - cfg.lambda * weight_regularizer(w);
                // Walk parameters of (w, velocity, grad) in lockstep.
                std::vector<double*> gp;
                gp.reserve(w.parameter_count());
                grad.for_each_parameter([&](double& x) { gp.push_back(&x); });
                std::size_t idx = 0;
                std::vector<double*> vp;
                vp.reserve(gp.size());
                velocity.for_each_parameter([&](double& x) { vp.push_back(&x); });
                w.for_each_parameter([&](double& x) {
                    const double g = *gp[idx];
                    if (cfg.momentum)
                    {
                        double& v = *vp[idx];
                        v = cfg.momentum_coeff * v - cfg.lr * g;
                        x += v;
                    }
                    else
                    {
                        x -= cfg.lr * g;
                    }
                    ++idx;
                });
            }
            result.train_loss.push_back(epoch_loss / static_cast<double>(train_set.size()));
            if (!val_set.empty())
            {
                result.val_loss.push_back(mean_data_loss(val_set));
            }
        }
        return result;
    }

    struct Prediction
    {
        FreqVectorField v_pre;
        DeformationField psi;
        double initial_ssd = 0.0;
        double final_ssd = 0.0;
        double min_detjac = 1.0;
    };

    /// Forward pass on the band spectra of S and T, then geodesic shooting.
    inline Prediction predict(const SpatialImage& S, const SpatialImage& T, const DualNetWeights& w,
                              const RegConfig& cfg)
    {
        cfg.validate();
        const auto spec = cfg.band_spec();
        if (!(S.extents() == spec.grid_extents()) || !(T.extents() == spec.grid_extents()))
        {
            throw SpecMismatch("predict: images must match the configured grid");
        }
        Prediction p;
        p.v_pre = forward_traced(spatial_to_band(S, spec), spatial_to_band(T, spec), w).v_pre;
        const auto op = make_operator(cfg.alpha, cfg.power, spec);
        p.psi = shoot_deformation(p.v_pre, op, cfg.steps, S.extents());
        p.initial_ssd = mean_ssd(S, T);
        p.final_ssd = mean_ssd(warp(S, p.psi), T);
        p.min_detjac = min_value(det_jacobian(p.psi));
        return p;
    }

} // namespace bandreg
