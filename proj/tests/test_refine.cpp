#include "doctest.h"

#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <vector>

#include <omp.h>

#include "rollalign/refine.hpp"
#include "rollalign/synth.hpp"

using namespace rollalign;

namespace {

RefineConfig quiet(std::vector<int> dilations) {
    RefineConfig cfg;
    cfg.num_steps = static_cast<int>(dilations.size());
    cfg.dilation_schedule = std::move(dilations);
    cfg.noise_scale_schedule.assign(static_cast<std::size_t>(cfg.num_steps), 0.0);
    return cfg;
}

// Frame f holds the constant f, so a hook can tell which frames it was given.
DepthVideo labelled_video(int frames, int h, int w) {
    std::vector<float> v;
    for (int f = 0; f < frames; ++f) v.insert(v.end(), static_cast<std::size_t>(h * w), static_cast<float>(f));
    return DepthVideo(frames, h, w, v);
}

// Adds 100 * (slot + 1) + 1000 * (first frame of the snippet) and records every call.
class TaggingHook final : public DenoiserHook {
public:
    SnippetFrames denoise(const SnippetFrames& noisy, int step, double level) const override {
        SnippetFrames out = noisy;
        const std::size_t fs = static_cast<std::size_t>(noisy.height) * noisy.width;
        const double anchor = noisy.values[0];
        for (int m = 0; m < noisy.length; ++m)
            for (std::size_t p = 0; p < fs; ++p)
                out.values[static_cast<std::size_t>(m) * fs + p] += static_cast<float>(100.0 * (m + 1) + 1000.0 * anchor);
        std::lock_guard<std::mutex> lock(mutex_);
        calls_.push_back({step, level});
        return out;
    }
    std::string name() const override { return "tagging"; }
    std::vector<std::pair<int, double>> calls() const { return calls_; }

private:
    mutable std::mutex mutex_;
    mutable std::vector<std::pair<int, double>> calls_;
};

class SerialProbeHook final : public DenoiserHook {
public:
    SnippetFrames denoise(const SnippetFrames& noisy, int, double) const override {
        if (omp_in_parallel()) parallel_calls_++;
        return noisy;
    }
    bool thread_safe() const override { return false; }
    std::string name() const override { return "probe"; }
    mutable int parallel_calls_ = 0;
};

class BrokenHook final : public DenoiserHook {
public:
    explicit BrokenHook(bool wrong_shape) : wrong_shape_(wrong_shape) {}
    SnippetFrames denoise(const SnippetFrames& noisy, int, double) const override {
        SnippetFrames out = noisy;
        if (wrong_shape_) {
            out.values.pop_back();
        } else {
            out.values[0] = NAN;
        }
        return out;
    }
    std::string name() const override { return "broken"; }

private:
    bool wrong_shape_;
};

double mean_abs_laplacian(const DepthVideo& v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int f = 0; f < v.frames(); ++f)
        for (int y = 1; y + 1 < v.height(); ++y)
            for (int x = 1; x + 1 < v.width(); ++x) {
                const double lap = v.at(f, y - 1, x) + v.at(f, y + 1, x) + v.at(f, y, x - 1) +
                                   v.at(f, y, x + 1) - 4.0 * v.at(f, y, x);
                sum += std::abs(lap);
                ++n;
            }
    return sum / static_cast<double>(n);
}

DepthVideo salt_and_pepper_fixture() {
    SceneSpec spec;
    spec.kind = SceneKind::orbiting_sphere_field;
    spec.frames = 12;
    spec.height = 32;
    spec.width = 48;
    spec.seed = 3;
    const auto gt = generate(spec).inverse_depth;
    std::vector<float> values(gt.values().begin(), gt.values().end());
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> pixel(0, gt.frame_size() - 1);
    const std::size_t offset = 5 * gt.frame_size();
    for (int i = 0; i < 80; ++i) values[offset + pixel(rng)] = (i % 2 == 0) ? 0.05f : 3.0f;
    return DepthVideo(gt.frames(), gt.height(), gt.width(), values);
}

}  // namespace

TEST_CASE("config defaults and validation") {
    RefineConfig cfg;
    CHECK(cfg.start_fraction == 0.5);
    CHECK(cfg.num_steps == 10);
    CHECK(cfg.dilation_schedule == std::vector<int>{6, 5, 5, 4, 4, 3, 3, 2, 2, 1});
    const auto levels = cfg.resolved_noise_schedule();
    REQUIRE(levels.size() == 10);
    for (std::size_t s = 0; s < levels.size(); ++s)
        CHECK(levels[s] == doctest::Approx(0.5 * (1.0 - static_cast<double>(s) / 10.0)));
    CHECK_NOTHROW(cfg.validate());

    auto bad = cfg;
    bad.dilation_schedule = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.num_steps = 3;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.start_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.noise_scale_schedule = {0.1, 0.2, 0, 0, 0, 0, 0, 0, 0, 0};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cfg;
    bad.noise_scale_schedule = {1.5, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);

    CHECK(make_hook("identity")->name() == "identity");
    CHECK(make_hook("gaussian_smooth")->name() == "gaussian_smooth");
    CHECK(make_hook("snippet_mean")->name() == "snippet_mean");
    CHECK_THROWS_AS(make_hook("unet"), InvalidArgument);
}

TEST_CASE("identity hook with zero noise is a bit-exact no-op") {
    const auto video = salt_and_pepper_fixture();
    const auto out = refine(video, quiet({6, 5, 5, 4, 4, 3, 3, 2, 2, 1}), IdentityHook{});
    REQUIRE(out.same_shape(video));
    for (std::size_t i = 0; i < video.values().size(); ++i) REQUIRE(out.values()[i] == video.values()[i]);

    RefineConfig silent;
    silent.noise_amplitude = 0.0;
    const auto out2 = refine(video, silent, IdentityHook{});
    for (std::size_t i = 0; i < video.values().size(); ++i) REQUIRE(out2.values()[i] == video.values()[i]);
}

TEST_CASE("identity hook with noise returns the input plus the shared noise field") {
    RefineConfig cfg;
    cfg.noise_seed = 11;
    cfg.noise_amplitude = 0.2;
    const auto video = salt_and_pepper_fixture();
    const auto noise = refine_noise_field(cfg, video.height(), video.width());
    double energy = 0.0;
    for (float n : noise) energy += std::abs(n);
    CHECK(energy > 0.0);
    const auto out = refine(video, cfg, IdentityHook{});
    for (int f = 0; f < video.frames(); ++f)
        for (std::size_t p = 0; p < video.frame_size(); ++p)
            REQUIRE(out.frame(f)[p] == video.frame(f)[p] + noise[p]);
}

TEST_CASE("property: every frame becomes the mean of its covering snippet outputs") {
    const int frames = 11;
    for (int g : {1, 2, 3}) {
        const auto video = labelled_video(frames, 2, 3);
        TaggingHook hook;
        const auto out = refine(video, quiet({g}), hook);
        // Independent enumeration of the stride-1, 3-frame schedule at dilation g.
        std::vector<int> anchors;
        for (int a = 0; a + 2 * g <= frames - 1; ++a) anchors.push_back(a);
        if (anchors.back() + 2 * g != frames - 1) anchors.push_back(frames - 1 - 2 * g);
        CHECK(hook.calls().size() == anchors.size());
        for (int i = 0; i < frames; ++i) {
            double sum = 0.0;
            int count = 0;
            for (int a : anchors)
                for (int m = 0; m < 3; ++m)
                    if (a + m * g == i) {
                        sum += i + 100.0 * (m + 1) + 1000.0 * a;
                        ++count;
                    }
            REQUIRE(count > 0);
            for (float v : out.frame(i)) CHECK(v == doctest::Approx(sum / count).epsilon(1e-7));
        }
    }
}

TEST_CASE("the hook sees every step with its noise level") {
    RefineConfig cfg;
    cfg.noise_amplitude = 0.0;
    TaggingHook hook;
    refine(labelled_video(40, 1, 1), cfg, hook);
    std::map<int, std::pair<std::size_t, double>> per_step;
    for (auto [step, level] : hook.calls()) {
        per_step[step].first++;
        per_step[step].second = level;
    }
    REQUIRE(per_step.size() == 10);
    const auto levels = cfg.resolved_noise_schedule();
    for (int s = 0; s < 10; ++s) {
        const int g = cfg.dilation_schedule[static_cast<std::size_t>(s)];
        // 40 - 2g regular snippets, always ending on the last frame.
        CHECK(per_step[s].first == static_cast<std::size_t>(40 - 2 * g));
        CHECK(per_step[s].second == levels[static_cast<std::size_t>(s)]);
    }
}

TEST_CASE("short videos fall back to dilations that cover every frame") {
    for (int frames : {1, 2, 3, 5, 8, 13}) {
        const auto video = labelled_video(frames, 2, 2);
        const auto out = refine(video, quiet({6, 5, 5, 4, 4, 3, 3, 2, 2, 1}), SnippetMeanHook{});
        REQUIRE(out.same_shape(video));
        for (float v : out.values()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("smoothing hooks reduce high-frequency energy") {
    const auto video = salt_and_pepper_fixture();
    const double before = mean_abs_laplacian(video);
    RefineConfig cfg;
    cfg.noise_seed = 5;
    cfg.noise_amplitude = 0.02;
    const auto smoothed = refine(video, cfg, GaussianSmoothHook{});
    CHECK(mean_abs_laplacian(smoothed) < before);
    const auto averaged = refine(video, quiet({6, 5, 5, 4, 4, 3, 3, 2, 2, 1}), SnippetMeanHook{});
    CHECK(mean_abs_laplacian(averaged) < before);
}

TEST_CASE("space tag and shape are preserved") {
    const auto video = DepthVideo::filled(7, 3, 4, 2.0f, SpaceTag::depth);
    const auto out = refine(video, RefineConfig{}, GaussianSmoothHook{});
    CHECK(out.space() == SpaceTag::depth);
    CHECK(out.same_shape(video));
}

TEST_CASE("refinement is deterministic across runs and thread counts") {
    const auto video = salt_and_pepper_fixture();
    RefineConfig cfg;
    cfg.noise_seed = 8;
    cfg.noise_amplitude = 0.1;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto a = refine(video, cfg, GaussianSmoothHook{});
    omp_set_num_threads(4);
    const auto b = refine(video, cfg, GaussianSmoothHook{});
    omp_set_num_threads(saved);
    const auto c = refine(video, cfg, GaussianSmoothHook{});
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        REQUIRE(a.values()[i] == b.values()[i]);
        REQUIRE(a.values()[i] == c.values()[i]);
    }
    cfg.noise_seed = 9;
    const auto d = refine(video, cfg, GaussianSmoothHook{});
    CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), d.values().begin()));
}

TEST_CASE("single-threaded hooks are never called concurrently") {
    SerialProbeHook probe;
    refine(labelled_video(20, 4, 4), RefineConfig{}, probe);
    CHECK(probe.parallel_calls_ == 0);
}

TEST_CASE("bad hook output raises HookFailure") {
    const auto video = labelled_video(6, 2, 2);
    CHECK_THROWS_AS(refine(video, quiet({1}), BrokenHook(true)), HookFailure);
    CHECK_THROWS_AS(refine(video, quiet({1}), BrokenHook(false)), HookFailure);
}
