#include "rollalign/refine.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rollalign/scheduler.hpp"

namespace rollalign {

std::vector<double> RefineConfig::resolved_noise_schedule() const {
    if (!noise_scale_schedule.empty()) return noise_scale_schedule;
    std::vector<double> levels(static_cast<std::size_t>(std::max(num_steps, 0)));
    for (int s = 0; s < num_steps; ++s)
        levels[static_cast<std::size_t>(s)] =
            start_fraction * (1.0 - static_cast<double>(s) / num_steps);
    return levels;
}

void RefineConfig::validate() const {
    if (!(start_fraction > 0.0 && start_fraction < 1.0))
        throw InvalidArgument("start_fraction must lie in (0, 1)");
    if (num_steps < 1) throw InvalidArgument("refinement needs at least one step");
    if (static_cast<int>(dilation_schedule.size()) != num_steps)
        throw InvalidArgument("dilation schedule length must equal num_steps");
    for (std::size_t s = 0; s < dilation_schedule.size(); ++s) {
        if (dilation_schedule[s] < 1) throw InvalidArgument("refinement dilation must be >= 1");
        if (s > 0 && dilation_schedule[s] > dilation_schedule[s - 1])
            throw InvalidArgument("refinement dilation schedule must be non-increasing");
    }
    const auto levels = resolved_noise_schedule();
    if (static_cast<int>(levels.size()) != num_steps)
        throw InvalidArgument("noise scale schedule length must equal num_steps");
    for (std::size_t s = 0; s < levels.size(); ++s) {
        if (!(levels[s] >= 0.0 && levels[s] <= 1.0))
            throw InvalidArgument("noise scales must lie in [0, 1]");
        if (s > 0 && levels[s] > levels[s - 1])
            throw InvalidArgument("noise scale schedule must be non-increasing");
    }
    if (!(noise_amplitude >= 0.0)) throw InvalidArgument("noise amplitude must be >= 0");
    if (snippet_length < 1) throw InvalidArgument("snippet length must be >= 1");
}

GaussianSmoothHook::GaussianSmoothHook(double sigma_px) {
    if (!(sigma_px > 0.0)) throw InvalidArgument("blur sigma must be > 0");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma_px));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel_.push_back(std::exp(-0.5 * i * i / (sigma_px * sigma_px)));
        total += kernel_.back();
    }
    for (double& k : kernel_) k /= total;
}

SnippetFrames GaussianSmoothHook::denoise(const SnippetFrames& noisy, int, double) const {
    const int h = noisy.height;
    const int w = noisy.width;
    const int radius = static_cast<int>(kernel_.size() / 2);
    SnippetFrames out = noisy;
    std::vector<double> tmp(static_cast<std::size_t>(h) * w);
    // Replicated borders.
    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
    for (int f = 0; f < noisy.length; ++f) {
        const float* src = noisy.values.data() + static_cast<std::size_t>(f) * h * w;
        float* dst = out.values.data() + static_cast<std::size_t>(f) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel_[static_cast<std::size_t>(i + radius)] *
                           src[static_cast<std::size_t>(y) * w + clampi(x + i, w - 1)];
                tmp[static_cast<std::size_t>(y) * w + x] = acc;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel_[static_cast<std::size_t>(i + radius)] *
                           tmp[static_cast<std::size_t>(clampi(y + i, h - 1)) * w + x];
                dst[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
            }
    }
    return out;
}

SnippetFrames SnippetMeanHook::denoise(const SnippetFrames& noisy, int, double) const {
    const std::size_t frame_size = static_cast<std::size_t>(noisy.height) * noisy.width;
    SnippetFrames out = noisy;
    for (std::size_t p = 0; p < frame_size; ++p) {
        double sum = 0.0;
        for (int f = 0; f < noisy.length; ++f)
            sum += noisy.values[static_cast<std::size_t>(f) * frame_size + p];
        const auto mean = static_cast<float>(sum / noisy.length);
        for (int f = 0; f < noisy.length; ++f)
            out.values[static_cast<std::size_t>(f) * frame_size + p] = mean;
    }
    return out;
}

std::unique_ptr<DenoiserHook> make_hook(std::string_view name) {
    if (name == "identity") return std::make_unique<IdentityHook>();
    if (name == "gaussian_smooth") return std::make_unique<GaussianSmoothHook>();
    if (name == "snippet_mean") return std::make_unique<SnippetMeanHook>();
    throw InvalidArgument("unknown denoiser hook '" + std::string(name) + "'");
}

std::vector<float> refine_noise_field(const RefineConfig& config, int height, int width) {
    const auto levels = config.resolved_noise_schedule();
    const double sigma = config.noise_amplitude * (levels.empty() ? 0.0 : levels.front());
    std::vector<float> field(static_cast<std::size_t>(height) * width, 0.0f);
    if (sigma == 0.0) return field;
    std::mt19937_64 rng(config.noise_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (float& v : field) v = static_cast<float>(sigma * normal(rng));
    return field;
}

DepthVideo refine(const DepthVideo& video, const RefineConfig& config, const DenoiserHook& hook) {
    config.validate();
    const int n_f = video.frames();
    const int h = video.height();
    const int w = video.width();
    const std::size_t frame_size = video.frame_size();
    const auto levels = config.resolved_noise_schedule();

    // One noise realization shared by all frames.
    std::vector<float> current(video.values().begin(), video.values().end());
    const auto noise = refine_noise_field(config, h, w);
    if (std::any_of(noise.begin(), noise.end(), [](float v) { return v != 0.0f; })) {
        for (int f = 0; f < n_f; ++f)
            for (std::size_t p = 0; p < frame_size; ++p)
                current[static_cast<std::size_t>(f) * frame_size + p] += noise[p];
    }

    const int n = std::min(config.snippet_length, n_f);
    for (int step = 0; step < config.num_steps; ++step) {
        // A stride-1 schedule covers every frame only while n * g <= N_F; coarser dilations
        // fall back to the largest one that does.
        int g = config.dilation_schedule[static_cast<std::size_t>(step)];
        if (n > 1) g = std::min(g, std::max(1, n_f / n));
        const int dilations[] = {g};
        const auto schedule = build_schedule(n_f, n, dilations, 1);
        const int n_t = schedule.size();

        std::vector<SnippetFrames> outputs(static_cast<std::size_t>(n_t));
        std::vector<std::uint8_t> bad(static_cast<std::size_t>(n_t), 0);
        auto run = [&](int k) {
            const auto& spec = schedule.snippet(k);
            SnippetFrames in{n, h, w, {}};
            in.values.reserve(static_cast<std::size_t>(n) * frame_size);
            for (int f : spec.frame_indices) {
                const auto begin = current.begin() + static_cast<std::ptrdiff_t>(f * frame_size);
                in.values.insert(in.values.end(), begin,
                                 begin + static_cast<std::ptrdiff_t>(frame_size));
            }
            auto out = hook.denoise(in, step, levels[static_cast<std::size_t>(step)]);
            const bool shape_ok = out.length == n && out.height == h && out.width == w &&
                                  out.values.size() == in.values.size();
            bool finite = shape_ok;
            if (shape_ok)
                for (float v : out.values) finite = finite && std::isfinite(v);
            bad[static_cast<std::size_t>(k)] = !(shape_ok && finite);
            outputs[static_cast<std::size_t>(k)] = std::move(out);
        };
        if (hook.thread_safe()) {
#pragma omp parallel for schedule(dynamic)
            for (int k = 0; k < n_t; ++k) run(k);
        } else {
            for (int k = 0; k < n_t; ++k) run(k);
        }
        for (int k = 0; k < n_t; ++k)
            if (bad[static_cast<std::size_t>(k)])
                throw HookFailure("denoiser '" + hook.name() + "' returned a mismatched or "
                                  "non-finite snippet at step " + std::to_string(step));

        // Barrier: every frame becomes the mean of the snippet outputs covering it.
#pragma omp parallel for schedule(static)
        for (int f = 0; f < n_f; ++f) {
            const auto cover = schedule.coverage(f);
            float* dst = current.data() + static_cast<std::size_t>(f) * frame_size;
            for (std::size_t p = 0; p < frame_size; ++p) {
                double sum = 0.0;
                for (const auto& slot : cover)
                    sum += outputs[static_cast<std::size_t>(slot.snippet_id)]
                               .values[static_cast<std::size_t>(slot.slot) * frame_size + p];
                dst[p] = static_cast<float>(sum / static_cast<double>(cover.size()));
            }
        }
    }
    return DepthVideo(n_f, h, w, std::move(current), video.space());
}

}  // namespace rollalign
