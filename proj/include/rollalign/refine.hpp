#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rollalign/core.hpp"

namespace rollalign {

struct RefineConfig {
    // Fraction of the diffusion trajectory to restart from (T/2 -> 0.5).
    double start_fraction = 0.5;
    int num_steps = 10;
    std::vector<int> dilation_schedule{6, 5, 5, 4, 4, 3, 3, 2, 2, 1};
    std::uint64_t noise_seed = 0;
    // Per-step noise level, non-increasing in [0, 1]. Empty selects a linear decay from
    // start_fraction towards 0.
    std::vector<double> noise_scale_schedule;
    // Standard deviation of the injected noise at level 1, in depth-map units.
    double noise_amplitude = 1.0;
    int snippet_length = 3;

    std::vector<double> resolved_noise_schedule() const;
    void validate() const;
};

// One snippet handed to a denoiser: n x H x W values, row-major per frame.
struct SnippetFrames {
    int length = 0;
    int height = 0;
    int width = 0;
    std::vector<float> values;
};

// Stand-in for the snippet diffusion model. Must return a snippet of identical shape.
class DenoiserHook {
public:
    virtual ~DenoiserHook() = default;
    virtual SnippetFrames denoise(const SnippetFrames& noisy, int step, double noise_level) const = 0;
    // When false, the runner invokes the hook from one thread only.
    virtual bool thread_safe() const { return true; }
    virtual std::string name() const = 0;
};

class IdentityHook final : public DenoiserHook {
public:
    SnippetFrames denoise(const SnippetFrames& noisy, int, double) const override { return noisy; }
    std::string name() const override { return "identity"; }
};

// Separable spatial Gaussian blur of every frame.
class GaussianSmoothHook final : public DenoiserHook {
public:
    explicit GaussianSmoothHook(double sigma_px = 1.0);
    SnippetFrames denoise(const SnippetFrames& noisy, int step, double noise_level) const override;
    std::string name() const override { return "gaussian_smooth"; }

private:
    std::vector<double> kernel_;
};

// Replaces every frame by the per-pixel temporal mean over the snippet.
class SnippetMeanHook final : public DenoiserHook {
public:
    SnippetFrames denoise(const SnippetFrames& noisy, int step, double noise_level) const override;
    std::string name() const override { return "snippet_mean"; }
};

std::unique_ptr<DenoiserHook> make_hook(std::string_view name);

// The noise field added to every frame before the first denoising step.
std::vector<float> refine_noise_field(const RefineConfig& config, int height, int width);

DepthVideo refine(const DepthVideo& video, const RefineConfig& config, const DenoiserHook& hook);

}  // namespace rollalign
