#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace bandreg;

namespace
{
    using oracle::CGrid;
    using oracle::complex_conv_ref;

    const BandSpec spec = BandSpec::uniform(2, 8, 32);

    ComplexFeatureMap random_cmap(int channels, const Extents& ext, std::mt19937_64& rng)
    {
        std::normal_distribution<double> n;
        ComplexFeatureMap x{FeatureMap(channels, ext), FeatureMap(channels, ext)};
        for (auto& v : x.re.data)
        {
            v = n(rng);
        }
        for (auto& v : x.im.data)
        {
            v = n(rng);
        }
        return x;
    }

    CGrid to_cgrid(const ComplexFeatureMap& x)
    {
        CGrid g(x.re.channels, std::vector<cplx>(x.re.extents.size()));
        for (int c = 0; c < x.re.channels; ++c)
        {
            for (std::size_t i = 0; i < g[c].size(); ++i)
            {
                g[c][i] = cplx(x.re.channel(c)[i], x.im.channel(c)[i]);
            }
        }
        return g;
    }

    TrainingExample random_example(std::mt19937_64& rng, double label_scale = 1.0)
    {
        return {oracle::random_field(spec, rng), oracle::random_field(spec, rng),
                oracle::random_vector(spec, rng, true, label_scale)};
    }

    DualNetWeights with_random_biases(DualNetWeights w, std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-0.1, 0.1);
        for (auto* net : {&w.r_net, &w.i_net})
        {
            for (auto& l : *net)
            {
                for (auto& b : l.bias)
                {
                    b = u(rng);
                }
            }
        }
        return w;
    }

    std::vector<double*> parameters_of(RealNet& net, std::size_t layer, bool bias)
    {
        std::vector<double*> out;
        auto& v = bias ? net[layer].bias : net[layer].kernel;
        for (auto& x : v)
        {
            out.push_back(&x);
        }
        return out;
    }

    const std::vector<double>& slot_of(const RealNet& net, std::size_t layer, bool bias)
    {
        return bias ? net[layer].bias : net[layer].kernel;
    }
}

TEST(ComplexConv, MatchesComplexArithmetic)
{
    for (int s = 0; s < 4; ++s)
    {
        std::mt19937_64 rng(100 + s);
        const bool three = s == 3;
        const auto ext = three ? Extents::uniform(3, 5) : Extents(2, {7, 6, 1});
        const LayerSpec l{3, 4, s == 1 ? 5 : 3, s == 2 ? 2 : 1, true};
        Architecture arch{three ? 3 : 2, {l}};
        const auto taps = arch.taps(l);
        std::vector<double> kernel(l.out_channels * l.in_channels * taps);
        std::normal_distribution<double> n;
        for (auto& k : kernel)
        {
            k = n(rng);
        }
        const auto x = random_cmap(3, ext, rng);
        const auto y = complex_conv(x, kernel, l, taps);
        const auto out_ext = detail::conv_output_extents(ext, l.stride);
        ASSERT_TRUE(y.re.extents == out_ext);
        const auto ref = complex_conv_ref(to_cgrid(x), ext, kernel, {}, l, out_ext);
        const auto got = to_cgrid(y);
        for (int c = 0; c < l.out_channels; ++c)
        {
            for (std::size_t i = 0; i < out_ext.size(); ++i)
            {
                EXPECT_LT(std::abs(got[c][i] - ref[c][i]), 1e-12);
            }
        }
    }
}

TEST(ComplexConv, RealAndImaginaryInputs)
{
    std::mt19937_64 rng(7);
    const auto ext = Extents::uniform(2, 6);
    const LayerSpec l{2, 3, 3, 1, true};
    const std::size_t taps = 9;
    std::vector<double> kernel(3 * 2 * taps);
    std::normal_distribution<double> n;
    for (auto& k : kernel)
    {
        k = n(rng);
    }
    auto x = random_cmap(2, ext, rng);
    std::fill(x.im.data.begin(), x.im.data.end(), 0.0);
    const auto y = complex_conv(x, kernel, l, taps);
    const auto real = conv_forward(x.re, ConvLayer{kernel, std::vector<double>(3, 0.0)}, l, taps);
    EXPECT_EQ(y.re.data, real.data);
    for (double v : y.im.data)
    {
        EXPECT_EQ(v, 0.0);
    }
    // x = i y
    const ComplexFeatureMap xi{FeatureMap(2, ext), x.re};
    const auto yi = complex_conv(xi, kernel, l, taps);
    EXPECT_EQ(yi.im.data, real.data);
    for (double v : yi.re.data)
    {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(ComplexConv, ShapeErrors)
{
    const auto ext = Extents::uniform(2, 4);
    const LayerSpec l{2, 1, 3, 1, true};
    ComplexFeatureMap x{FeatureMap(2, ext), FeatureMap(1, ext)};
    EXPECT_THROW(complex_conv(x, std::vector<double>(18), l, 9), SpecMismatch);
    ComplexFeatureMap ok{FeatureMap(2, ext), FeatureMap(2, ext)};
    EXPECT_THROW(complex_conv(ok, std::vector<double>(17), l, 9), SpecMismatch);
    ComplexFeatureMap wrong{FeatureMap(3, ext), FeatureMap(3, ext)};
    EXPECT_THROW(complex_conv(wrong, std::vector<double>(18), l, 9), SpecMismatch);
}

TEST(CRelu, Examples)
{
    EXPECT_EQ(crelu(cplx(-1.0, 2.0)), cplx(0.0, 2.0));
    EXPECT_EQ(crelu(cplx(3.5, 0.0)), cplx(3.5, 0.0));
    EXPECT_EQ(crelu(cplx(-0.5, -7.0)), cplx(0.0, 0.0));
    std::mt19937_64 rng(8);
    const auto y = random_cmap(2, Extents::uniform(2, 5), rng);
    const auto once = crelu(y);
    const auto twice = crelu(once);
    EXPECT_EQ(once.re.data, twice.re.data);
    EXPECT_EQ(once.im.data, twice.im.data);
}

TEST(Architecture, StandardAndValidation)
{
    const auto a = Architecture::standard(2);
    ASSERT_EQ(a.layers.size(), 4u);
    EXPECT_EQ(a.layers[0].in_channels, 2);
    EXPECT_EQ(a.layers[0].out_channels, 16);
    EXPECT_EQ(a.layers[1].out_channels, 32);
    EXPECT_EQ(a.layers[2].out_channels, 32);
    EXPECT_EQ(a.layers[3].out_channels, 2);
    EXPECT_FALSE(a.layers[3].activation);
    EXPECT_EQ(a.taps(a.layers[0]), 9u);
    EXPECT_EQ(Architecture::standard(3).taps(Architecture::standard(3).layers[0]), 27u);
    EXPECT_NO_THROW(a.validate());

    auto broken = a;
    broken.layers[1].in_channels = 15;
    EXPECT_THROW(broken.validate(), std::invalid_argument);
    broken = a;
    broken.layers[0].kernel = 4;
    EXPECT_THROW(broken.validate(), std::invalid_argument);
    broken = a;
    broken.layers[3].out_channels = 3;
    EXPECT_THROW(broken.validate(), std::invalid_argument);
}

TEST(DualNetWeights, InitIsSeededAndFanInScaled)
{
    const auto arch = Architecture::standard(2);
    const auto a = DualNetWeights::init(arch, 5);
    const auto b = DualNetWeights::init(arch, 5);
    const auto c = DualNetWeights::init(arch, 6);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_NE(a.r_net, a.i_net);
    for (std::size_t p = 0; p < arch.layers.size(); ++p)
    {
        const double k = 1.0 / std::sqrt(arch.layers[p].in_channels * 9.0);
        for (double x : a.r_net[p].kernel)
        {
            EXPECT_LE(std::abs(x), k);
        }
        for (double x : a.r_net[p].bias)
        {
            EXPECT_EQ(x, 0.0);
        }
    }
    const auto tied = DualNetWeights::init(arch, 5, true);
    EXPECT_TRUE(tied.i_net.empty());
    EXPECT_EQ(tied.parameter_count() * 2, a.parameter_count());
}

TEST(Forward, DualNetEqualsComplexNetworkWithTiedWeights)
{
    for (int s = 0; s < 5; ++s)
    {
        std::mt19937_64 rng(200 + s);
        const auto arch = Architecture::two_layer(2, 6, s % 2 == 0 ? 3 : 5);
        const auto w = with_random_biases(DualNetWeights::init(arch, 300 + s, true), 400 + s);
        const auto ex = random_example(rng);
        const auto ext = spec.band_extents();

        CGrid x(2, std::vector<cplx>(spec.size()));
        for (std::size_t i = 0; i < spec.size(); ++i)
        {
            x[0][i] = ex.s_freq[i];
            x[1][i] = ex.t_freq[i];
        }
        for (std::size_t p = 0; p < arch.layers.size(); ++p)
        {
            const auto& l = arch.layers[p];
            x = complex_conv_ref(x, ext, w.r_net[p].kernel, w.r_net[p].bias, l, ext);
            if (l.activation)
            {
                for (auto& ch : x)
                {
                    for (auto& z : ch)
                    {
                        z = crelu(z);
                    }
                }
            }
        }
        FreqVectorField ref(spec);
        for (int j = 0; j < 2; ++j)
        {
            std::copy(x[j].begin(), x[j].end(), ref[j].coeffs().begin());
        }
        ref = hermitian_part(ref);
        const auto got = forward(ex, w);
        EXPECT_LT(std::sqrt(oracle::diff_norm2(got[0], ref[0]) + oracle::diff_norm2(got[1], ref[1])), 1e-12);
    }
}

TEST(Forward, ZeroWeightsGiveZeroVelocity)
{
    std::mt19937_64 rng(9);
    const auto ex = random_example(rng);
    const auto v = forward(ex, DualNetWeights::zeros(Architecture::standard(2), false));
    EXPECT_EQ(max_abs(v), 0.0);
    EXPECT_TRUE(v.spec() == ex.v_opt.spec());
}

TEST(Forward, OutputIsHermitian)
{
    std::mt19937_64 rng(10);
    const auto w = with_random_biases(DualNetWeights::init(Architecture::standard(2), 11), 12);
    const auto v = forward(random_example(rng), w);
    EXPECT_LT(hermitian_defect(v), 1e-15);
}

TEST(Forward, RejectsMismatchedArchitecture)
{
    std::mt19937_64 rng(13);
    const auto ex = random_example(rng);
    auto w = DualNetWeights::init(Architecture::standard(3), 1);
    EXPECT_THROW(forward(ex, w), SpecMismatch);
    auto strided = Architecture::two_layer(2, 4);
    strided.layers[0].stride = 2;
    EXPECT_THROW(forward(ex, DualNetWeights::init(strided, 1)), SpecMismatch);
}

TEST(Loss, DecouplingIdentityOnRandomFields)
{
    std::mt19937_64 rng(14);
    for (int s = 0; s < 1000; ++s)
    {
        const bool herm = s % 2 == 0;
        const auto a = oracle::random_vector(spec, rng, herm);
        const auto b = oracle::random_vector(spec, rng, herm);
        double complex_norm = 0.0;
        for (int j = 0; j < 2; ++j)
        {
            for (std::size_t i = 0; i < spec.size(); ++i)
            {
                complex_norm += std::norm(a[j][i] - b[j][i]);
            }
        }
        EXPECT_NEAR(decoupled_sq_distance(a, b), complex_norm, 1e-12 * complex_norm);
    }
}

TEST(Loss, SingleCoefficientExample)
{
    FreqVectorField v(spec);
    v[0].at_freq({1, 2, 0}) = cplx(3.0, 4.0);
    EXPECT_EQ(decoupled_sq_distance(FreqVectorField(spec), v), 25.0);

    // zero net predicts 0; label carries 3+4i at one coefficient
    std::mt19937_64 rng(15);
    auto ex = random_example(rng);
    ex.v_opt = v;
    TrainConfig cfg;
    cfg.lambda = 0.0;
    const std::vector<TrainingExample> batch{ex};
    EXPECT_EQ(loss(batch, DualNetWeights::zeros(cfg.arch, false), cfg), 25.0);
}

TEST(Loss, PerfectPredictionAndRegularizer)
{
    std::mt19937_64 rng(16);
    auto ex = random_example(rng);
    const auto w = DualNetWeights::init(Architecture::two_layer(2, 4), 17);
    ex.v_opt = forward(ex, w);
    TrainConfig cfg;
    cfg.arch = w.arch;
    cfg.lambda = 0.0;
    const std::vector<TrainingExample> batch{ex};
    EXPECT_EQ(loss(batch, w, cfg), 0.0);
    const auto g = backward(batch, w, cfg);
    auto gc = g;
    double worst = 0.0;
    gc.for_each_parameter([&](double& x) { worst = std::max(worst, std::abs(x)); });
    EXPECT_EQ(worst, 0.0);

    cfg.lambda = 0.5;
    double sq = 0.0;
    for (const auto* net : {&w.r_net, &w.i_net})
    {
        for (const auto& l : *net)
        {
            for (double x : l.kernel)
            {
                sq += x * x;
            }
        }
    }
    EXPECT_NEAR(loss(batch, w, cfg), 0.5 * sq, 1e-15 * sq);
    EXPECT_THROW(loss(std::span<const TrainingExample>{}, w, cfg), std::invalid_argument);
}

TEST(Backward, RegularizerGradientIsTwoLambdaW)
{
    std::mt19937_64 rng(18);
    auto ex = random_example(rng);
    const auto w = with_random_biases(DualNetWeights::init(Architecture::two_layer(2, 4), 19), 20);
    ex.v_opt = forward(ex, w);
    TrainConfig cfg;
    cfg.arch = w.arch;
    cfg.lambda = 0.3;
    const std::vector<TrainingExample> batch{ex};
    const auto g = backward(batch, w, cfg);
    for (std::size_t p = 0; p < w.r_net.size(); ++p)
    {
        for (std::size_t i = 0; i < w.r_net[p].kernel.size(); ++i)
        {
            EXPECT_EQ(g.r_net[p].kernel[i], 2.0 * 0.3 * w.r_net[p].kernel[i]);
            EXPECT_EQ(g.i_net[p].kernel[i], 2.0 * 0.3 * w.i_net[p].kernel[i]);
        }
        for (double b : g.r_net[p].bias)
        {
            EXPECT_EQ(b, 0.0);
        }
    }
}

namespace
{
    void check_backprop(bool tie)
    {
        std::mt19937_64 rng(tie ? 21 : 22);
        Architecture arch{2, {{2, 5, 3, 1, true}, {5, 4, 3, 1, true}, {4, 2, 3, 1, false}}};
        auto w = with_random_biases(DualNetWeights::init(arch, 23, tie), 24);
        std::vector<TrainingExample> batch{random_example(rng), random_example(rng)};
        TrainConfig cfg;
        cfg.arch = arch;
        cfg.lambda = 1e-2;
        const auto g = backward(batch, w, cfg);
        std::uniform_int_distribution<std::size_t> pick;
        const double h = 1e-6;
        for (bool imag_side : {false, true})
        {
            if (tie && imag_side)
            {
                continue;
            }
            for (std::size_t p = 0; p < arch.layers.size(); ++p)
            {
                for (bool bias : {false, true})
                {
                    auto& net = imag_side ? w.i_net : w.r_net;
                    const auto params = parameters_of(net, p, bias);
                    const auto& gslot = slot_of(imag_side ? g.i_net : g.r_net, p, bias);
                    for (int k = 0; k < 20; ++k)
                    {
                        const std::size_t i = pick(rng) % params.size();
                        const double saved = *params[i];
                        *params[i] = saved + h;
                        const double lp = loss(batch, w, cfg);
                        *params[i] = saved - h;
                        const double lm = loss(batch, w, cfg);
                        *params[i] = saved;
                        const double fd = (lp - lm) / (2.0 * h);
                        const double an = gslot[i];
                        EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(std::abs(fd), 1e-3))
                            << (imag_side ? "I" : "R") << "_net layer " << p << (bias ? " bias " : " kernel ") << i;
                    }
                }
            }
        }
    }
}

TEST(Backward, MatchesCentralDifferences) { check_backprop(false); }

TEST(Backward, MatchesCentralDifferencesWithTiedWeights) { check_backprop(true); }

TEST(TrainConfig, DefaultsAndValidation)
{
    const TrainConfig cfg;
    EXPECT_EQ(cfg.batch, 64);
    EXPECT_EQ(cfg.lr, 1e-4);
    EXPECT_EQ(cfg.lambda, 1e-4);
    EXPECT_EQ(cfg.epochs, 2000);
    EXPECT_FALSE(cfg.tie_weights);
    EXPECT_FALSE(cfg.momentum);
    EXPECT_EQ(cfg.arch, Architecture::standard(2));
    auto bad = cfg;
    bad.lr = 0.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.batch = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.lambda = -1.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

namespace
{
    std::vector<TrainingExample> teacher_set(int n, std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        const auto teacher = with_random_biases(DualNetWeights::init(Architecture::two_layer(2, 8), seed + 1), seed);
        std::vector<TrainingExample> set;
        for (int i = 0; i < n; ++i)
        {
            auto ex = random_example(rng);
            ex.v_opt = forward(ex, teacher);
            set.push_back(std::move(ex));
        }
        return set;
    }
}

TEST(Train, OverfitsTenExamples)
{
    const auto set = teacher_set(10, 30);
    TrainConfig cfg;
    cfg.arch = Architecture::two_layer(2, 8);
    cfg.epochs = 200;
    cfg.batch = 10;
    cfg.lr = 1e-3;
    cfg.momentum = true;
    cfg.lambda = 0.0;
    cfg.seed = 31;
    const auto r = train(set, {}, cfg);
    ASSERT_EQ(r.train_loss.size(), 200u);
    EXPECT_LE(r.train_loss.back(), 0.1 * r.train_loss.front()) << r.train_loss.back() / r.train_loss.front();
}

TEST(Train, BitReproducibleForFixedSeed)
{
    const auto set = teacher_set(12, 40);
    TrainConfig cfg;
    cfg.arch = Architecture::two_layer(2, 4);
    cfg.epochs = 5;
    cfg.batch = 4;
    cfg.lr = 1e-3;
    cfg.momentum = true;
    cfg.seed = 41;
    const auto a = train(set, set, cfg);
    const auto b = train(set, set, cfg);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.train_loss, b.train_loss);
    EXPECT_EQ(a.val_loss, b.val_loss);
    EXPECT_EQ(a.val_loss.size(), 5u);
}

TEST(Train, AbortsOnNonFiniteLoss)
{
    const auto set = teacher_set(4, 50);
    TrainConfig cfg;
    cfg.arch = Architecture::two_layer(2, 4);
    cfg.epochs = 50;
    cfg.batch = 4;
    cfg.lr = 1e6;
    try
    {
        train(set, {}, cfg);
        FAIL() << "expected TrainingDiverged";
    }
    catch (const TrainingDiverged& e)
    {
        EXPECT_GE(e.epoch(), 1);
        EXPECT_LE(e.epoch(), 50);
    }
    EXPECT_THROW(train(std::span<const TrainingExample>{}, {}, cfg), std::invalid_argument);
}

TEST(Train, LossDecreasesOnBullEyeLabels)
{
    auto reg = oracle::desk_config();
    reg.max_iters = 20;
    const auto pool = gen_bulleye(24, 60, reg.grid);
    const auto pairs = bulleye_pairs(pool, 61);
    const auto spec = reg.band_spec();
    std::vector<TrainingExample> set;
    for (const auto& p : pairs)
    {
        const auto r = register_pair(p.source, p.target, reg);
        set.push_back({spatial_to_band(p.source, spec), spatial_to_band(p.target, spec), r.v_opt});
    }
    TrainConfig cfg;
    cfg.epochs = 11;
    cfg.batch = 4;
    cfg.lr = 1e-4;
    cfg.seed = 62;
    const auto r = train(set, {}, cfg);
    int decreases = 0;
    for (std::size_t e = 1; e < r.train_loss.size(); ++e)
    {
        EXPECT_TRUE(std::isfinite(r.train_loss[e]));
        decreases += r.train_loss[e] < r.train_loss[e - 1] ? 1 : 0;
    }
    EXPECT_GE(decreases, 8);
}

TEST(Predict, ZeroWeightsGiveIdentity)
{
    const auto cfg = oracle::desk_config();
    const auto pool = gen_bulleye(2, 70, cfg.grid);
    const auto p = predict(pool[0].image, pool[1].image, DualNetWeights::zeros(Architecture::standard(2), false), cfg);
    EXPECT_EQ(max_abs(p.v_pre), 0.0);
    EXPECT_EQ(p.min_detjac, 1.0);
    EXPECT_EQ(p.final_ssd, p.initial_ssd);
    for (int j = 0; j < 2; ++j)
    {
        for (double x : p.psi.displacement[j].data())
        {
            EXPECT_EQ(x, 0.0);
        }
    }
}

TEST(Predict, GridMismatchThrows)
{
    const auto cfg = oracle::desk_config();
    const SpatialImage S(Extents::uniform(2, 16));
    EXPECT_THROW(predict(S, S, DualNetWeights::zeros(Architecture::standard(2), false), cfg), SpecMismatch);
}
