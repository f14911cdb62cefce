#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "dropcell/brightfield.hpp"
#include "dropcell/synth.hpp"
#include "support.hpp"

using namespace dropcell;
using namespace dropcell::brightfield;

namespace {

constexpr double pi = std::numbers::pi;

RasterImage shifted(const RasterImage& img, int k) {
    RasterImage out = img;
    for (auto& s : out.samples()) s = static_cast<std::uint8_t>(std::clamp(int(s) + k, 0, 255));
    return out;
}

// Small random scene: 1-3 droplets on a mildly textured background.
synth::SceneSpec small_scene(std::mt19937_64& rng) {
    synth::SceneSpec s;
    s.width = 200;
    s.height = 200;
    s.background = {150, 150, 150};
    s.texture_amplitude = 0.05;
    s.noise_sigma = 2.0;
    s.seed = rng();
    std::uniform_real_distribution<double> ud(28.0, 60.0), uj(-6.0, 6.0);
    const Point2 slots[3] = {{50, 50}, {145, 60}, {95, 145}};
    const int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i) {
        synth::DropletSpec d;
        d.center = {slots[i].x + uj(rng), slots[i].y + uj(rng)};
        d.diameter = ud(rng);
        s.droplets.push_back(d);
    }
    return s;
}

}  // namespace

TEST(Background, SingleFrameIsIdentity) {
    RasterImage f(8, 6, 3, 0);
    for (std::size_t i = 0; i < f.samples().size(); ++i) f.samples()[i] = static_cast<std::uint8_t>(i * 7);
    auto bg = build_background({f});
    EXPECT_EQ(bg.mean_image, f);
    EXPECT_EQ(bg.frame_count, 1);
}

TEST(Background, ArithmeticMeanRounded) {
    auto bg = build_background({RasterImage(4, 4, 1, 100), RasterImage(4, 4, 1, 200)});
    EXPECT_EQ(bg.mean_image, RasterImage(4, 4, 1, 150));
    auto odd = build_background({RasterImage(2, 2, 1, 100), RasterImage(2, 2, 1, 101)});
    EXPECT_EQ(odd.mean_image.at(0, 0), 101);  // 100.5 rounds half up
}

TEST(Background, Errors) {
    EXPECT_THROW(build_background({}), InputError);
    EXPECT_THROW(build_background({RasterImage(4, 4, 1), RasterImage(4, 5, 1)}), InputError);
    EXPECT_THROW(build_background({RasterImage(4, 4, 1), RasterImage(4, 4, 3)}), InputError);
}

TEST(Background, NoisyFramesAverageToClean) {
    synth::SceneSpec s;
    s.width = 160;
    s.height = 120;
    s.texture_amplitude = 0.1;
    s.noise_sigma = 8.0;
    s.background = {180, 180, 180};  // stay clear of clipping at 255
    synth::SceneSpec clean = s;
    clean.noise_sigma = 0.0;
    const RasterImage truth = synth::render_background(clean, 0);
    auto bg = testsupport::background_for(s, 10);
    // Averaging N frames leaves residual noise of sigma/sqrt(N) = 2.53 here.
    // A bound of 8 sits at ~3.2 sigma, so a few hundredths of a percent of
    // the samples exceed it by chance; the statistics are what we pin.
    const double expected_sd = 8.0 / std::sqrt(10.0);
    const auto n = truth.samples().size();
    double sum = 0, sum_sq = 0;
    std::size_t over = 0;
    int worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int e = int(bg.mean_image.samples()[i]) - int(truth.samples()[i]);
        sum += e;
        sum_sq += double(e) * e;
        over += std::abs(e) > 8;
        worst = std::max(worst, std::abs(e));
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum_sq / n - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.1);
    // quantization to integers adds 1/12 to the variance
    EXPECT_NEAR(sd, std::sqrt(expected_sd * expected_sd + 1.0 / 12), 0.1 * expected_sd);
    EXPECT_LT(double(over) / n, 0.002);
    EXPECT_LE(worst, int(std::ceil(5 * expected_sd)));
}

TEST(Subtract, SelfIsZero) {
    auto s = testsupport::droplet_field(3.0, 0);
    s.width = s.height = 300;
    s.droplets.resize(1);
    const auto [img, truth] = synth::render_brightfield(s);
    auto diff = subtract_background(img, build_background({img}));
    EXPECT_EQ(diff, RasterImage(300, 300, 1, 0));
}

TEST(Subtract, ExactDiskContrast) {
    RasterImage bg(64, 64, 1, 128), frame(64, 64, 1, 128);
    auto disk = testsupport::disk_mask(64, 64, 32, 32, 10);
    for (std::size_t i = 0; i < disk.size(); ++i) {
        if (disk.test(i)) frame.samples()[i] = 64;
    }
    auto diff = subtract_background(frame, build_background({bg}));
    for (std::size_t i = 0; i < disk.size(); ++i) ASSERT_EQ(diff.samples()[i], disk.test(i) ? 64 : 0);
}

TEST(Subtract, ChannelCollapseByMaximum) {
    RasterImage bg(1, 1, 3, 100), frame(1, 1, 3, 100);
    frame.at(0, 0, 1) = 70;
    frame.at(0, 0, 2) = 110;
    EXPECT_EQ(subtract_background(frame, build_background({bg})).at(0, 0), 30);
}

TEST(Subtract, DimensionMismatch) {
    EXPECT_THROW(subtract_background(RasterImage(4, 4, 1), build_background({RasterImage(5, 4, 1)})), InputError);
}

TEST(Subtract, StaticTextureCancels) {
    const auto s = testsupport::droplet_field();
    const auto [img, truth] = synth::render_brightfield(s);
    const auto diff = subtract_background(img, testsupport::background_for(s));
    std::size_t outside = 0, quiet = 0;
    for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
            bool near = false;
            for (const auto& d : s.droplets) near |= std::hypot(x + 0.5 - d.center.x, y + 0.5 - d.center.y) < d.diameter / 2 + 1;
            for (const auto& sp : s.speckles) near |= x >= sp.x && x < sp.x + sp.width && y >= sp.y && y < sp.y + sp.height;
            if (near) continue;
            ++outside;
            quiet += diff.at(x, y) < 10;
        }
    }
    EXPECT_GT(double(quiet) / double(outside), 0.99);
}

TEST(Segment, BlankImageGivesNothing) {
    EXPECT_TRUE(segment_droplets(RasterImage(64, 64, 1, 0), SegmentationConfig{}).empty());
}

TEST(Segment, FiveDropletsWithAndWithoutSpeckles) {
    for (int speckles : {0, 20}) {
        const auto s = testsupport::droplet_field(3.0, speckles);
        const auto [img, truth] = synth::render_brightfield(s);
        const auto regions = segment_droplets(subtract_background(img, testsupport::background_for(s)), {});
        ASSERT_EQ(regions.size(), 5u) << speckles << " speckles";
        for (const auto& d : s.droplets) {
            const Region* best = nullptr;
            for (const auto& r : regions) {
                if (!best || std::hypot(r.centroid.x - d.center.x, r.centroid.y - d.center.y) <
                                 std::hypot(best->centroid.x - d.center.x, best->centroid.y - d.center.y)) {
                    best = &r;
                }
            }
            EXPECT_NEAR(equivalent_diameter(double(best->pixel_count)), d.diameter, 0.02 * d.diameter);
        }
    }
}

TEST(Segment, FixedThresholdMode) {
    const auto s = testsupport::droplet_field(0.0, 0);
    const auto [img, truth] = synth::render_brightfield(s);
    SegmentationConfig cfg;
    cfg.threshold_mode = ThresholdMode::fixed;
    cfg.fixed_threshold = 40;
    EXPECT_EQ(segment_droplets(subtract_background(img, testsupport::background_for(s)), cfg).size(), 5u);
}

TEST(Segment, HoleFillingMattersForRimOnlyDroplets) {
    // A droplet whose interior matches the background shows up as a ring.
    synth::SceneSpec s;
    s.width = s.height = 200;
    synth::DropletSpec d;
    d.center = {100, 100};
    d.diameter = 120;
    s.droplets.push_back(d);
    const auto [img, truth] = synth::render_brightfield(s);
    const auto diff = subtract_background(img, testsupport::background_for(s, 1));
    SegmentationConfig cfg;
    auto filled = segment_droplets(diff, cfg);
    ASSERT_EQ(filled.size(), 1u);
    EXPECT_NEAR(equivalent_diameter(double(filled[0].pixel_count)), 120.0, 2.4);
    cfg.fill_holes = false;
    cfg.min_circularity = 0.0;
    auto ring = segment_droplets(diff, cfg);
    ASSERT_EQ(ring.size(), 1u);
    EXPECT_LT(ring[0].pixel_count, filled[0].pixel_count / 2);
}

TEST(Segment, ConfigValidation) {
    SegmentationConfig cfg;
    cfg.gaussian_sigma = -1;
    EXPECT_THROW(cfg.validate(), InputError);
    cfg = {};
    cfg.min_area = 0;
    EXPECT_THROW(cfg.validate(), InputError);
    cfg = {};
    cfg.min_circularity = 1.2;
    EXPECT_THROW(cfg.validate(), InputError);
    EXPECT_THROW(segment_droplets(RasterImage(4, 4, 3), {}), InputError);
}

TEST(Metrics, DiameterDefinitionAndUnits) {
    EXPECT_NEAR(equivalent_diameter(pi * 50 * 50), 100.0, 1e-12);
    auto m = testsupport::disk_mask(128, 128, 64, 64, 50);
    auto regions = label_components(m);
    auto rec = droplet_metrics(regions, 1.5);
    ASSERT_EQ(rec.size(), 1u);
    EXPECT_NEAR(rec[0].diameter_px, 100.0, 2.0);
    ASSERT_TRUE(rec[0].diameter_um);
    EXPECT_NEAR(*rec[0].diameter_um, rec[0].diameter_px * 1.5, 1e-12);
    EXPECT_FALSE(droplet_metrics(regions, std::nullopt)[0].diameter_um);
    EXPECT_DOUBLE_EQ(rec[0].diameter_px, 2.0 * std::sqrt(rec[0].area_px / pi));
    EXPECT_DOUBLE_EQ(rec[0].circularity, circularity(rec[0].area_px, rec[0].perimeter_px));
}

TEST(Population, ClosedForms) {
    auto recs = [](std::vector<double> ds) {
        std::vector<DropletRecord> out;
        for (double d : ds) {
            DropletRecord r;
            r.diameter_px = d;
            out.push_back(r);
        }
        return out;
    };
    auto eq = population_stats(recs({80, 80, 80}));
    EXPECT_EQ(eq.count, 3u);
    EXPECT_DOUBLE_EQ(eq.cv_percent, 0.0);
    auto s = population_stats(recs({90, 100, 110}));
    EXPECT_DOUBLE_EQ(s.mean_diameter, 100.0);
    EXPECT_NEAR(s.sd_diameter, std::sqrt(200.0 / 3.0), 1e-12);
    EXPECT_NEAR(s.cv_percent, 8.16496580927726, 1e-9);
    EXPECT_THROW(population_stats({}), InputError);
}

TEST(Population, FiftyDropletsRecoverGeneratorSpread) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> nd(70.0, 70.0 * 0.03);
    synth::SceneSpec s;
    s.width = 1024;
    s.height = 1024;
    s.noise_sigma = 3.0;
    std::vector<double> drawn;
    for (int i = 0; i < 50; ++i) {
        synth::DropletSpec d;
        d.center = {60.0 + (i % 8) * 128.0, 60.0 + (i / 8) * 130.0};
        d.diameter = nd(rng);
        drawn.push_back(d.diameter);
        s.droplets.push_back(d);
    }
    const auto [img, truth] = synth::render_brightfield(s);
    const auto regions = segment_droplets(subtract_background(img, testsupport::background_for(s, 5)), {});
    ASSERT_EQ(regions.size(), 50u);
    std::vector<DropletRecord> gen;
    for (double d : drawn) {
        DropletRecord r;
        r.diameter_px = d;
        gen.push_back(r);
    }
    const auto measured = population_stats(droplet_metrics(regions, std::nullopt));
    const auto expected = population_stats(gen);
    EXPECT_NEAR(measured.cv_percent, expected.cv_percent, 1.0);
    EXPECT_NEAR(measured.mean_diameter, expected.mean_diameter, 0.02 * expected.mean_diameter);
}

// Randomized invariants: determinism, speckle robustness, intensity-shift
// robustness, and the circularity floor.
TEST(BrightfieldProperties, RandomScenes) {
    std::mt19937_64 rng(77);
    const SegmentationConfig cfg;
    for (int trial = 0; trial < 100; ++trial) {
        auto s = small_scene(rng);
        const auto bg = testsupport::background_for(s, 3);
        const auto [img, truth] = synth::render_brightfield(s);
        const auto base = segment_droplets(subtract_background(img, bg), cfg);
        ASSERT_EQ(base.size(), s.droplets.size()) << "trial " << trial;
        EXPECT_EQ(segment_droplets(subtract_background(img, bg), cfg), base);

        for (const auto& r : base) {
            EXPECT_GE(circularity(double(r.pixel_count), r.perimeter), cfg.min_circularity);
        }

        // Speckles smaller than min_area never change the count.
        auto speckled = s;
        const int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) {
            synth::SpeckleSpec sp;
            sp.width = 1 + static_cast<int>(rng() % 4);
            sp.height = 1 + static_cast<int>(rng() % 4);
            sp.x = static_cast<int>(rng() % (s.width - sp.width));
            sp.y = static_cast<int>(rng() % (s.height - sp.height));
            bool overlaps = false;
            for (const auto& d : s.droplets) {
                overlaps |= std::hypot(sp.x + 2 - d.center.x, sp.y + 2 - d.center.y) < d.diameter / 2 + 10;
            }
            if (!overlaps) speckled.speckles.push_back(sp);
        }
        const auto [simg, struth] = synth::render_brightfield(speckled);
        EXPECT_EQ(segment_droplets(subtract_background(simg, bg), cfg).size(), base.size());

        // A constant offset on frame and background cancels in the subtraction.
        const int k = static_cast<int>(rng() % 61) - 30;
        const BackgroundModel bgk{shifted(bg.mean_image, k), bg.frame_count};
        EXPECT_EQ(segment_droplets(subtract_background(shifted(img, k), bgk), cfg), base);
    }
}
