#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rollalign/core.hpp"

namespace rollalign {

// Displacements from frame t to frame t+1 for t in [0, N_F-2], stored (N_F-1) x 2 x H x W
// with channel 0 = dx and channel 1 = dy, in pixels.
class FlowField {
public:
    FlowField(int pairs, int height, int width, std::vector<float> displacement,
              std::vector<std::uint8_t> valid = {});

    static FlowField zeros(int pairs, int height, int width);

    int pairs() const noexcept { return pairs_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t frame_size() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    std::span<const float> displacement() const noexcept { return displacement_; }
    // Empty when every pixel is valid.
    std::span<const std::uint8_t> valid() const noexcept { return valid_; }
    bool has_mask() const noexcept { return !valid_.empty(); }

    float dx(int pair, std::size_t pixel) const {
        return displacement_[(2 * static_cast<std::size_t>(pair)) * frame_size() + pixel];
    }
    float dy(int pair, std::size_t pixel) const {
        return displacement_[(2 * static_cast<std::size_t>(pair) + 1) * frame_size() + pixel];
    }
    bool is_valid(int pair, std::size_t pixel) const {
        return valid_.empty() || valid_[static_cast<std::size_t>(pair) * frame_size() + pixel] != 0;
    }

private:
    int pairs_;
    int height_;
    int width_;
    std::vector<float> displacement_;
    std::vector<std::uint8_t> valid_;
};

// Optional per-pixel evaluation mask over a whole video; nonzero = use the pixel.
using PixelMask = std::vector<std::uint8_t>;

struct LinearFit {
    double scale = 1.0;
    double shift = 0.0;
    std::size_t count = 0;
};

// One scale/shift shared by every frame, least squares in inverse-depth space. Either input
// is converted to inverse depth first if tagged as depth.
LinearFit ls_align(const DepthVideo& pred, const DepthVideo& gt, const PixelMask* mask = nullptr);

// Both inputs in depth space, pred already aligned.
double abs_rel(const DepthVideo& pred_depth, const DepthVideo& gt_depth,
               const PixelMask* mask = nullptr);
double delta1(const DepthVideo& pred_depth, const DepthVideo& gt_depth,
              const PixelMask* mask = nullptr);

enum class Sampling { bilinear, nearest };

struct OpwResult {
    double raw = 0.0;
    std::size_t count = 0;
    double scaled() const noexcept { return raw * 1e3; }
};

// Mean |d_t(p) - d_{t+1}(p + flow_t(p))| / m_t over consecutive pairs and valid, in-bounds
// pixels, where m_t is the average of the two frames' mean absolute values.
OpwResult opw(const DepthVideo& video, const FlowField& flow,
              Sampling sampling = Sampling::bilinear);

struct MetricsReport {
    double abs_rel = 0.0;
    double delta1 = 0.0;
    std::optional<OpwResult> opw;
    double scale = 1.0;
    double shift = 0.0;
    std::size_t valid_pixels = 0;
    // Aligned inverse depths at or below eps_inv, guarded before conversion to depth.
    std::size_t clamped = 0;
};

struct EvalOptions {
    Sampling sampling = Sampling::bilinear;
    double eps_inv = kDefaultEpsInv;
};

// ls_align in inverse depth, then AbsRel and delta1 in depth; OPW on the aligned depth.
MetricsReport evaluate(const DepthVideo& pred, const DepthVideo& gt,
                       const FlowField* flow = nullptr, const PixelMask* mask = nullptr,
                       const EvalOptions& options = {});

}  // namespace rollalign
