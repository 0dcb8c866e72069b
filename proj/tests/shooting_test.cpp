#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace bandreg;

namespace
{
    const BandSpec spec = BandSpec::uniform(2, 8, 32);
    const SmoothingOperator op = make_operator(3.0, 6, spec);

    FreqVectorField smooth_velocity(std::uint64_t seed, double scale)
    {
        std::mt19937_64 rng(seed);
        return apply_K(op, oracle::random_vector(spec, rng, true, scale));
    }

    SpatialImage ramp_image(const Extents& ext)
    {
        SpatialImage img(ext);
        for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t f) {
            img[f] = std::sin(0.3 * i[0]) + 0.1 * i[1] + 0.01 * i[0] * i[1];
        });
        return img;
    }

    double rel_diff(const FreqVectorField& a, const FreqVectorField& b)
    {
        return oracle::rel_error(a, b);
    }
}

TEST(EpdiffRhs, MatchesSpatialOracle)
{
    for (int s = 0; s < 5; ++s)
    {
        std::mt19937_64 rng(200 + s);
        const auto v = oracle::random_vector(spec, rng);
        EXPECT_LT(rel_diff(epdiff_rhs(v, op), oracle::epdiff_rhs(v, 3.0, 6, spec.grid_extents())), 1e-10);
    }
}

TEST(EpdiffRhs, RejectsForeignOperator)
{
    const auto other = make_operator(3.0, 6, BandSpec::uniform(2, 6, 32));
    EXPECT_THROW(epdiff_rhs(FreqVectorField(spec), other), SpecMismatch);
}

TEST(Shooting, ZeroVelocityIsExactFixedPoint)
{
    const FreqVectorField zero(spec);
    const auto path = shoot(zero, op, 10);
    ASSERT_EQ(path.velocities.size(), 11u);
    for (const auto& v : path.velocities)
    {
        EXPECT_EQ(max_abs(v), 0.0);
    }
    EXPECT_EQ(max_abs(path.displacement), 0.0);
    ShootingKernel kernel(op, 10);
    EXPECT_EQ(max_abs(kernel.displacement(zero)), 0.0);
}

TEST(Shooting, PathShape)
{
    const auto path = shoot(smooth_velocity(1, 1.0), op, 7);
    EXPECT_EQ(path.steps, 7);
    EXPECT_EQ(path.velocities.size(), 8u);
    EXPECT_DOUBLE_EQ(path.dt(), 1.0 / 7.0);
    for (const auto& v : path.velocities)
    {
        EXPECT_TRUE(v.spec() == spec);
    }
    EXPECT_THROW(integrate_epdiff(smooth_velocity(1, 1.0), op, 0), std::invalid_argument);
    EXPECT_THROW(ShootingKernel(op, 0), std::invalid_argument);
}

TEST(Shooting, OutputsStayHermitian)
{
    const auto path = shoot(smooth_velocity(2, 1.0), op, 10);
    for (const auto& v : path.velocities)
    {
        EXPECT_LT(hermitian_defect(v), 1e-12);
    }
    EXPECT_LT(hermitian_defect(path.displacement), 1e-12);
}

TEST(Shooting, ConstantVelocityTranslates)
{
    // a DC-only velocity has zero Jacobian, so u_1 = -v exactly
    FreqVectorField v(spec);
    v[0].at_freq({0, 0, 0}) = 1.5;
    v[1].at_freq({0, 0, 0}) = -0.25;
    const auto path = shoot(v, op, 10);
    EXPECT_NEAR(std::abs(path.displacement[0].at_freq({0, 0, 0}) + 1.5), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(path.displacement[1].at_freq({0, 0, 0}) - 0.25), 0.0, 1e-14);
}

TEST(Shooting, EulerIsFirstOrder)
{
    const auto v0 = smooth_velocity(3, 1.0);
    const auto ref = shoot(v0, op, 160).displacement;
    const double e10 = rel_diff(shoot(v0, op, 10).displacement, ref);
    const double e20 = rel_diff(shoot(v0, op, 20).displacement, ref);
    ASSERT_GT(e20, 0.0);
    const double ratio = e10 / e20;
    EXPECT_GE(ratio, 1.5);
    EXPECT_LE(ratio, 2.5);
}

TEST(ShootingKernel, AgreesWithReferenceIntegrator)
{
    for (int s = 0; s < 3; ++s)
    {
        const auto v0 = smooth_velocity(10 + s, 1.0);
        ShootingKernel kernel(op, 10);
        EXPECT_LT(rel_diff(kernel.displacement(v0), shoot(v0, op, 10).displacement), 1e-11);
    }
}

TEST(ShootingKernel, RealizationMatchesBandToSpatial)
{
    const auto v0 = smooth_velocity(20, 1.0);
    ShootingKernel kernel(op, 10);
    const auto u = kernel.displacement(v0);
    const auto psi = kernel.realize(u, spec.grid_extents());
    const auto ref = to_deformation(u, spec.grid_extents());
    for (int j = 0; j < 2; ++j)
    {
        for (std::size_t i = 0; i < ref.displacement[j].size(); ++i)
        {
            EXPECT_NEAR(psi.displacement[j][i], ref.displacement[j][i], 1e-12);
        }
    }
}

TEST(ShootingKernel, ThreeDimensionalAgreement)
{
    const auto spec3 = BandSpec::uniform(3, 4, 8);
    const auto op3 = make_operator(3.0, 6, spec3);
    std::mt19937_64 rng(30);
    const auto v0 = apply_K(op3, oracle::random_vector(spec3, rng, true, 2.0));
    ShootingKernel kernel(op3, 5);
    EXPECT_LT(rel_diff(kernel.displacement(v0), shoot(v0, op3, 5).displacement), 1e-11);
}

TEST(Shooting, HugeVelocityRaisesDiverged)
{
    std::mt19937_64 rng(40);
    const auto v0 = oracle::random_vector(spec, rng, true, 1e60);
    EXPECT_THROW(shoot(v0, op, 10), DivergedError);
    ShootingKernel kernel(op, 10);
    EXPECT_THROW(kernel.displacement(v0), DivergedError);
}

TEST(Warp, IdentityIsExact)
{
    const auto ext = Extents::uniform(2, 16);
    const auto img = ramp_image(ext);
    EXPECT_EQ(warp(img, DeformationField::identity(ext)), img);
}

TEST(Warp, IntegerShiftRolls)
{
    const auto ext = Extents::uniform(2, 16);
    const auto img = ramp_image(ext);
    auto psi = DeformationField::identity(ext);
    std::fill(psi.displacement[0].data().begin(), psi.displacement[0].data().end(), 3.0);
    std::fill(psi.displacement[1].data().begin(), psi.displacement[1].data().end(), -2.0);
    const auto out = warp(img, psi);
    for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t f) {
        EXPECT_DOUBLE_EQ(out[f], img.wrapped(i[0] + 3, i[1] - 2));
    });
}

TEST(Warp, HalfShiftAverages)
{
    const auto ext = Extents::uniform(2, 8);
    const auto img = ramp_image(ext);
    auto psi = DeformationField::identity(ext);
    std::fill(psi.displacement[1].data().begin(), psi.displacement[1].data().end(), 0.5);
    const auto out = warp(img, psi);
    for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t f) {
        EXPECT_NEAR(out[f], 0.5 * (img.wrapped(i[0], i[1]) + img.wrapped(i[0], i[1] + 1)), 1e-15);
    });
}

TEST(Warp, ThreeDimensionalShift)
{
    const auto ext = Extents::uniform(3, 6);
    SpatialImage img(ext);
    for (std::size_t i = 0; i < img.size(); ++i)
    {
        img[i] = std::cos(0.37 * static_cast<double>(i));
    }
    auto psi = DeformationField::identity(ext);
    std::fill(psi.displacement[2].data().begin(), psi.displacement[2].data().end(), 1.0);
    const auto out = warp(img, psi);
    for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t f) {
        EXPECT_DOUBLE_EQ(out[f], img.wrapped(i[0], i[1], i[2] + 1));
    });
}

TEST(Warp, GridMismatchThrows)
{
    EXPECT_THROW(warp(SpatialImage(Extents::uniform(2, 8)), DeformationField::identity(Extents::uniform(2, 9))),
                 SpecMismatch);
}

TEST(WarpLabels, NearestNeighbourShift)
{
    const auto ext = Extents::uniform(2, 8);
    LabelMask m(ext);
    m.labels[ext.index(2, 3, 0)] = 1;
    auto psi = DeformationField::identity(ext);
    std::fill(psi.displacement[0].data().begin(), psi.displacement[0].data().end(), 1.2);
    const auto out = warp_labels(m, psi);
    EXPECT_EQ(out.labels[ext.index(1, 3, 0)], 1);
    EXPECT_EQ(std::count(out.labels.begin(), out.labels.end(), 1), 1);
}

TEST(DetJacobian, IdentityAndShiftAreOne)
{
    const auto ext = Extents::uniform(2, 12);
    auto psi = DeformationField::identity(ext);
    const auto id = det_jacobian(psi);
    for (double x : id.data())
    {
        EXPECT_EQ(x, 1.0);
    }
    std::fill(psi.displacement[0].data().begin(), psi.displacement[0].data().end(), 4.25);
    const auto shifted = det_jacobian(psi);
    for (double x : shifted.data())
    {
        EXPECT_EQ(x, 1.0);
    }
    const auto id3 = det_jacobian(DeformationField::identity(Extents::uniform(3, 5)));
    for (double x : id3.data())
    {
        EXPECT_EQ(x, 1.0);
    }
}

TEST(DetJacobian, SinusoidalClosedForm)
{
    const int n = 16;
    const double a = 1.3;
    const auto ext = Extents::uniform(2, n);
    auto psi = DeformationField::identity(ext);
    for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t f) {
        psi.displacement[0][f] = a * std::sin(oracle::two_pi * i[0] / n);
    });
    const auto J = det_jacobian(psi);
    for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t f) {
        const double expect = 1.0 + a * std::sin(oracle::two_pi / n) * std::cos(oracle::two_pi * i[0] / n);
        EXPECT_NEAR(J[f], expect, 1e-14);
    });
    EXPECT_LT(min_value(J), 0.8);
}

TEST(DetJacobian, ShearHasUnitDeterminant)
{
    const auto ext = Extents::uniform(2, 10);
    auto psi = DeformationField::identity(ext);
    for_each_index(ext, [&](const std::array<int, 3>& i, std::size_t f) {
        psi.displacement[1][f] = 0.4 * std::sin(oracle::two_pi * i[0] / 10.0);
    });
    const auto J = det_jacobian(psi);
    for (double x : J.data())
    {
        EXPECT_NEAR(x, 1.0, 1e-15);
    }
}

TEST(Shooting, ModerateVelocityStaysDiffeomorphicAndInvertible)
{
    const auto v0 = smooth_velocity(50, 1.0);
    const auto grid = spec.grid_extents();
    const auto psi = shoot_deformation(v0, op, 10, grid);
    ASSERT_GT(min_value(det_jacobian(psi)), 0.0);

    // fixed-point inverse: u_inv <- -u(x + u_inv)
    auto inv = DeformationField::identity(grid);
    for (int it = 0; it < 20; ++it)
    {
        DeformationField next = DeformationField::identity(grid);
        for (int j = 0; j < 2; ++j)
        {
            next.displacement[j] = warp(psi.displacement[j], inv);
            for (auto& x : next.displacement[j].data())
            {
                x = -x;
            }
        }
        inv = std::move(next);
    }
    // psi(inv(x)) = x + u_inv(x) + u(x + u_inv(x)) ~ x
    for (int j = 0; j < 2; ++j)
    {
        const auto composed = warp(psi.displacement[j], inv);
        for (std::size_t i = 0; i < composed.size(); ++i)
        {
            EXPECT_NEAR(composed[i] + inv.displacement[j][i], 0.0, 1e-2);
        }
    }
}
