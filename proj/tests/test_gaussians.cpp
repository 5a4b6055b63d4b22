#include "panoworld/gaussians.hpp"
#include "panoworld/oracle.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

using namespace panoworld;
using pwtest::pose_at;

namespace {

GaussianPrimitive splat(const Vec3& mu, double sigma, double alpha, const Vec3& rgb) {
    GaussianPrimitive g;
    g.mu = mu;
    g.sigma = Vec3::Constant(sigma);
    g.alpha = alpha;
    g.sh = ShColor::from_rgb(rgb);
    g.src_dir = mu.norm() > 0 ? Vec3(mu.normalized()) : Vec3::UnitX();
    return g;
}

std::vector<GaussianPrimitive> random_cloud(std::mt19937_64& rng, int n, const Vec3& center) {
    std::uniform_real_distribution<double> u(-3.0, 3.0), us(0.02, 0.3), ua(0.1, 1.0), uc(0.0, 1.0);
    std::vector<GaussianPrimitive> gs;
    for (int i = 0; i < n; ++i) {
        auto g = splat(center + Vec3(u(rng), u(rng), u(rng)), 0.1, ua(rng),
                       Vec3(uc(rng), uc(rng), uc(rng)));
        g.sigma = Vec3(us(rng), us(rng), us(rng));
        g.q = pwtest::random_rotation(rng);
        gs.push_back(g);
    }
    return gs;
}

double psnr_valid(const PanoImage& a, const PanoImage& b) {
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        if (!a.valid[i] || !b.valid[i]) {
            continue;
        }
        for (int c = 0; c < 3; ++c) {
            const double d = double(a.color[3 * i + c]) - double(b.color[3 * i + c]);
            se += d * d;
        }
        n += 3;
    }
    const double mse = se / static_cast<double>(n);
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace

// ---------------------------------------------------------------------------
// Spherical harmonics

TEST(ShEval, DcOnlyIsDirectionIndependent) {
    std::mt19937_64 rng(1);
    const Vec3 rgb(0.2, 0.5, 0.9);
    const auto sh = ShColor::from_rgb(rgb);
    for (int i = 0; i < 50; ++i) {
        EXPECT_LT((sh_eval(sh, pwtest::random_unit(rng)) - rgb).norm(), 1e-12);
    }
    EXPECT_LT((sh.base_rgb() - rgb).norm(), 1e-12);
}

TEST(ShEval, OppositeDirectionsFlipLinearPart) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 0.3);
    ShColor sh = ShColor::from_rgb(Vec3::Constant(0.5));
    for (auto& band : sh.linear) {
        band = Vec3(n(rng), n(rng), n(rng));
    }
    for (int i = 0; i < 50; ++i) {
        const Vec3 d = pwtest::random_unit(rng);
        const Vec3 plus = sh_eval(sh, d) - Vec3::Constant(0.5);
        const Vec3 minus = sh_eval(sh, -d) - Vec3::Constant(0.5);
        // Keep the linear part small enough that clamping never engages.
        EXPECT_LT((plus + minus).norm(), 1e-12);
    }
}

TEST(ShEval, MatchesTextbookBasis) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.4);
    const double y00 = 0.5 / std::sqrt(kPi);
    const double y1 = std::sqrt(3.0 / (4.0 * kPi));
    for (int trial = 0; trial < 200; ++trial) {
        ShColor sh;
        sh.dc = Vec3(n(rng), n(rng), n(rng));
        for (auto& band : sh.linear) {
            band = Vec3(n(rng), n(rng), n(rng));
        }
        const Vec3 d = pwtest::random_unit(rng);
        for (int c = 0; c < 3; ++c) {
            // Splatting convention: bands ordered (y, z, x) with Condon-Shortley signs.
            double v = 0.5 + y00 * sh.dc[c] + y1 * (-d.y() * sh.linear[0][c] +
                                                    d.z() * sh.linear[1][c] -
                                                    d.x() * sh.linear[2][c]);
            v = std::clamp(v, 0.0, 1.0);
            EXPECT_NEAR(sh_eval(sh, d)[c], v, 1e-12);
        }
    }
}

// ---------------------------------------------------------------------------
// Rendering

TEST(RenderPano, EmptyListGivesBackground) {
    RenderOptions opt;
    opt.background = {10, 20, 30};
    const auto img = render_pano({}, PanoPose{}, 64, 32, opt);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        EXPECT_EQ((*img.alpha)[i], 0.0f);
        EXPECT_FALSE(img.valid[i]);
        EXPECT_EQ(img.rgb(i), (std::array<std::uint8_t, 3>{10, 20, 30}));
    }
    EXPECT_EQ(img.provenance, Provenance::cache);
}

TEST(RenderPano, SingleGaussianAhead) {
    const int w = 512, h = 256;
    const Vec3 rgb(0.8, 0.4, 0.2);
    const std::vector<GaussianPrimitive> gs{splat(Vec3(2.0, 0.0, 0.0), 0.05, 0.99, rgb)};
    const auto img = render_pano(gs, PanoPose{}, w, h);
    const std::size_t i = img.index(w / 2, h / 2);
    EXPECT_TRUE(img.valid[i]);
    EXPECT_GE((*img.depth)[i], 1.95f);
    EXPECT_LE((*img.depth)[i], 2.05f);
    // Alpha below one leaves a sliver of black background.
    const auto c = img.rgb(i);
    const double a = (*img.alpha)[i];
    EXPECT_NEAR(c[0], a * 255.0 * rgb.x(), 1.0);
    EXPECT_NEAR(c[1], a * 255.0 * rgb.y(), 1.0);
    EXPECT_NEAR(c[2], a * 255.0 * rgb.z(), 1.0);
    // Far from the splat nothing is drawn.
    EXPECT_FALSE(img.valid[img.index(0, h / 2)]);
}

TEST(RenderPano, TwoGaussiansCompositeFrontToBack) {
    const int w = 256, h = 128;
    const Vec3 d = pixel_direction(w / 2, h / 2, w, h);
    const Vec3 c1(1.0, 0.0, 0.2), c2(0.0, 1.0, 0.6);
    const double a2 = 0.7;
    // Listed back-to-front to check sorting.
    const std::vector<GaussianPrimitive> gs{splat(2.0 * d, 0.02, a2, c2),
                                            splat(1.0 * d, 0.02, 0.9, c1)};
    const auto img = render_pano(gs, PanoPose{}, w, h);
    const std::size_t i = img.index(w / 2, h / 2);
    const double w1 = 0.9, w2 = a2 * (1.0 - 0.9);
    const Vec3 expect = 255.0 * (w1 * c1 + w2 * c2);
    const auto c = img.rgb(i);
    EXPECT_NEAR(c[0], expect.x(), 0.51);
    EXPECT_NEAR(c[1], expect.y(), 0.51);
    EXPECT_NEAR(c[2], expect.z(), 0.51);
    EXPECT_NEAR((*img.alpha)[i], w1 + w2, 1e-6);
    EXPECT_NEAR((*img.depth)[i], (w1 * 1.0 + w2 * 2.0) / (w1 + w2), 1e-5);
}

TEST(RenderPano, NormalizedColorIgnoresBackground) {
    const int w = 256, h = 128;
    const Vec3 d = pixel_direction(w / 2, h / 2, w, h);
    const std::vector<GaussianPrimitive> gs{splat(2.0 * d, 0.05, 0.8, Vec3(0.5, 0.5, 0.5))};
    RenderOptions opt;
    opt.normalize_color = true;
    const auto img = render_pano(gs, PanoPose{}, w, h, opt);
    const auto c = img.rgb(img.index(w / 2, h / 2));
    EXPECT_EQ(c[0], 128);
    EXPECT_EQ(c[2], 128);
}

TEST(RenderPano, DepthWithinContributorRange) {
    std::mt19937_64 rng(5);
    const int w = 128, h = 64;
    const auto gs = random_cloud(rng, 300, Vec3(0, 0, 0));
    PanoPose pose;
    pose.rotation = pwtest::random_rotation(rng);
    const auto img = render_pano(gs, pose, w, h);
    const Mat3 rot = pose.world_from_camera();
    int checked = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = img.index(x, y);
            EXPECT_LE((*img.alpha)[i], 1.0 + 1e-9);
            if (!img.valid[i]) {
                continue;
            }
            const Vec3 d = rot * pixel_direction(x, y, w, h);
            double lo = 1e30, hi = -1e30;
            for (const auto& g : gs) {
                const Mat3 r = g.q.toRotationMatrix();
                const Mat3 inv = r * g.sigma.cwiseProduct(g.sigma).cwiseInverse().asDiagonal() *
                                 r.transpose();
                const double t = d.dot(inv * g.mu) / d.dot(inv * d);
                const Vec3 delta = g.mu - t * d;
                if (t >= 1e-3 && delta.dot(inv * delta) <= 9.0 + 1e-9) {
                    lo = std::min(lo, t);
                    hi = std::max(hi, t);
                }
            }
            EXPECT_GE((*img.depth)[i], lo - 1e-4);
            EXPECT_LE((*img.depth)[i], hi + 1e-4);
            ++checked;
        }
    }
    EXPECT_GT(checked, 100);
}

TEST(RenderPano, RigidMotionInvariance) {
    std::mt19937_64 rng(6);
    const int w = 128, h = 64;
    const auto gs = random_cloud(rng, 200, Vec3(0.5, -0.2, 0.1));
    PanoPose pose;
    pose.position = Vec3(0.5, -0.2, 0.1);
    pose.rotation = pwtest::random_rotation(rng);
    const Quat t_rot = pwtest::random_rotation(rng);
    const Vec3 t_off(3.0, -1.0, 2.0);
    auto moved = gs;
    for (auto& g : moved) {
        g.mu = t_rot * g.mu + t_off;
        g.q = t_rot * g.q;
        g.src_dir = t_rot * g.src_dir;
    }
    PanoPose moved_pose;
    moved_pose.position = t_rot * pose.position + t_off;
    moved_pose.rotation = t_rot * pose.rotation;
    const auto a = render_pano(gs, pose, w, h);
    const auto b = render_pano(moved, moved_pose, w, h);
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        EXPECT_NEAR((*a.alpha)[i], (*b.alpha)[i], 1e-6);
        if (std::abs((*a.alpha)[i] - kValidAlpha) > 1e-5) {
            EXPECT_EQ(a.valid[i], b.valid[i]);
        }
        if (a.valid[i] && b.valid[i]) {
            for (int c = 0; c < 3; ++c) {
                EXPECT_LE(std::abs(int(a.color[3 * i + c]) - int(b.color[3 * i + c])), 1);
            }
            EXPECT_NEAR((*a.depth)[i], (*b.depth)[i], 1e-4);
        }
    }
}

TEST(RenderPano, ThreadCountDoesNotChangeOutput) {
    std::mt19937_64 rng(7);
    const auto gs = random_cloud(rng, 150, Vec3::Zero());
    const auto a = render_pano(gs, PanoPose{}, 128, 64);
    setenv("PANOWORLD_THREADS", "3", 1);
    const auto b = render_pano(gs, PanoPose{}, 128, 64);
    unsetenv("PANOWORLD_THREADS");
    EXPECT_EQ(a.color, b.color);
    EXPECT_EQ(*a.depth, *b.depth);
}

// ---------------------------------------------------------------------------
// Lifting

TEST(LiftPano, SinglePixelUnprojects) {
    auto pano = PanoImage::blank(64, 32);
    pano.valid.assign(pano.pixel_count(), 0);
    pano.depth = std::vector<float>(pano.pixel_count(), 0.0f);
    const std::size_t i = pano.index(32, 16);
    pano.valid[i] = 1;
    (*pano.depth)[i] = 2.0f;
    pano.set_rgb(i, {200, 100, 50});
    const auto pose = pose_at(1.0, 2.0, 1.5);
    const auto gs = lift_pano(pano, pose, 1, 7, 3);
    ASSERT_EQ(gs.size(), 1u);
    const Vec3 dir = pixel_direction(32, 16, 64, 32);
    EXPECT_LT((gs[0].mu - (pose.position + 2.0 * dir)).norm(), 1e-12);
    EXPECT_LT((gs[0].mu - (pose.position + Vec3(2.0, 0, 0))).norm(), 0.25);
    EXPECT_NEAR(gs[0].sigma.x(), 2.0 * 2.0 * kPi / 64 * kLiftSigmaFactor, 1e-12);
    EXPECT_EQ(gs[0].alpha, kLiftAlpha);
    EXPECT_EQ(gs[0].room, 7u);
    EXPECT_EQ(gs[0].src_node, 3u);
    EXPECT_LT((gs[0].sh.base_rgb() * 255.0 - Vec3(200, 100, 50)).norm(), 1e-9);
    for (const auto& band : gs[0].sh.linear) {
        EXPECT_EQ(band, Vec3::Zero());
    }
    EXPECT_NO_THROW(validate_gaussian(gs[0]));
}

TEST(LiftPano, InvalidAndMarkerPixelsAreSkipped) {
    auto pano = PanoImage::blank(64, 32, {255, 255, 255});
    pano.depth = std::vector<float>(pano.pixel_count(), 1.0f);
    EXPECT_TRUE(lift_pano(pano, PanoPose{}, 1, 0).empty());
    pano = PanoImage::blank(64, 32, {10, 10, 10});
    pano.depth = std::vector<float>(pano.pixel_count(), 1.0f);
    pano.valid.assign(pano.pixel_count(), 0);
    EXPECT_TRUE(lift_pano(pano, PanoPose{}, 1, 0).empty());
}

TEST(LiftPano, StrideCount) {
    auto pano = PanoImage::blank(64, 32, {10, 20, 30});
    pano.depth = std::vector<float>(pano.pixel_count(), 1.5f);
    EXPECT_EQ(lift_pano(pano, PanoPose{}, 4, 0).size(), 128u);
    EXPECT_EQ(lift_pano(pano, PanoPose{}, 1, 0).size(), 2048u);
    EXPECT_EQ(lift_pano(pano, PanoPose{}, 3, 0).size(), 22u * 11u);
}

TEST(LiftPano, MissingDepthOrBadStrideIsAnError) {
    auto pano = PanoImage::blank(64, 32);
    EXPECT_THROW(lift_pano(pano, PanoPose{}, 1, 0), Error);
    pano.depth = std::vector<float>(pano.pixel_count(), 1.0f);
    EXPECT_THROW(lift_pano(pano, PanoPose{}, 0, 0), Error);
}

TEST(LiftPano, SelfReprojectionFidelity) {
    const auto spec = pwtest::two_rooms(0.2);
    const auto shell = build_shell(spec);
    const auto tex = make_texture_seed(5, spec);
    const int w = 256, h = 128;
    const auto pose = pose_at(2.0, 2.0);
    const auto proxy = shell_render(shell, pose, w, h);
    const auto pano = oracle_generate(shell, tex, proxy, nullptr, nullptr, pose);
    const auto gs = lift_pano(pano, pose, 1, 0);
    for (const auto& g : gs) {
        ASSERT_NO_THROW(validate_gaussian(g));
    }
    const auto back = render_pano(gs, pose, w, h);
    std::size_t valid = 0;
    for (auto v : back.valid) {
        valid += v;
    }
    EXPECT_GT(valid, back.pixel_count() * 99 / 100);
    EXPECT_GE(psnr_valid(pano, back), 35.0);
}

// ---------------------------------------------------------------------------
// Validation and files

TEST(ValidateGaussian, RejectsBrokenInvariants) {
    GaussianPrimitive g;
    EXPECT_NO_THROW(validate_gaussian(g));
    auto bad = g;
    bad.sigma.y() = 0.0;
    EXPECT_THROW(validate_gaussian(bad), Error);
    bad = g;
    bad.alpha = 1.5;
    EXPECT_THROW(validate_gaussian(bad), Error);
    bad = g;
    bad.q = Quat(2.0, 0.0, 0.0, 0.0);
    EXPECT_THROW(validate_gaussian(bad), Error);
    bad = g;
    bad.src_dir = Vec3(1.0, 1.0, 0.0);
    EXPECT_THROW(validate_gaussian(bad), Error);
}

TEST(GaussianFile, RoundTripWithinFloatPrecision) {
    std::mt19937_64 rng(9);
    auto gs = random_cloud(rng, 50, Vec3(1, 2, 3));
    for (std::size_t i = 0; i < gs.size(); ++i) {
        gs[i].src_node = static_cast<NodeId>(i * 3);
        gs[i].room = static_cast<RoomId>(i % 4);
        gs[i].sh.linear[1] = Vec3(0.1, -0.2, 0.3);
    }
    const auto dir = pwtest::scratch_dir("gaussian_file");
    save_gaussians(dir / "c.bin", gs);
    EXPECT_EQ(std::filesystem::file_size(dir / "c.bin"), 16u + 112u * gs.size());
    const auto back = load_gaussians(dir / "c.bin");
    ASSERT_EQ(back.size(), gs.size());
    for (std::size_t i = 0; i < gs.size(); ++i) {
        EXPECT_LT((back[i].mu - gs[i].mu).norm(), 1e-5);
        EXPECT_LT((back[i].sigma - gs[i].sigma).norm(), 1e-6);
        EXPECT_NEAR(back[i].alpha, gs[i].alpha, 1e-7);
        EXPECT_LT((back[i].sh.linear[1] - gs[i].sh.linear[1]).norm(), 1e-6);
        EXPECT_EQ(back[i].src_node, gs[i].src_node);
        EXPECT_EQ(back[i].room, gs[i].room);
    }
}

TEST(GaussianFile, RejectsCorruptFiles) {
    const auto dir = pwtest::scratch_dir("gaussian_bad");
    std::ofstream(dir / "bad.bin") << "NOPE-not-a-cache";
    EXPECT_THROW(load_gaussians(dir / "bad.bin"), Error);
    EXPECT_THROW(load_gaussians(dir / "missing.bin"), Error);
    const std::vector<GaussianPrimitive> one{GaussianPrimitive{}};
    save_gaussians(dir / "trunc.bin", one);
    std::filesystem::resize_file(dir / "trunc.bin", 60);
    EXPECT_THROW(load_gaussians(dir / "trunc.bin"), Error);
}
