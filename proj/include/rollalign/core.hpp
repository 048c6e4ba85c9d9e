#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "rollalign/errors.hpp"

namespace rollalign {

inline constexpr double kDefaultEpsInv = 1e-6;
inline constexpr double kDefaultEpsNorm = 1e-6;

enum class SpaceTag { inverse_depth, depth };

std::string_view to_string(SpaceTag tag);
SpaceTag space_tag_from_string(std::string_view name);

// Dense N_F x H x W video of per-pixel depth or inverse depth, float32 storage.
class DepthVideo {
public:
    DepthVideo(int frames, int height, int width, std::vector<float> values,
               SpaceTag tag = SpaceTag::inverse_depth);

    static DepthVideo filled(int frames, int height, int width, float value,
                             SpaceTag tag = SpaceTag::inverse_depth);

    int frames() const noexcept { return frames_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t frame_size() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    SpaceTag space() const noexcept { return tag_; }

    std::span<const float> values() const noexcept { return values_; }
    std::span<const float> frame(int i) const;
    float at(int f, int y, int x) const {
        return values_[static_cast<std::size_t>(f) * frame_size() +
                       static_cast<std::size_t>(y) * width_ + x];
    }

    bool same_shape(const DepthVideo& other) const noexcept {
        return frames_ == other.frames_ && height_ == other.height_ && width_ == other.width_;
    }

private:
    int frames_;
    int height_;
    int width_;
    SpaceTag tag_;
    std::vector<float> values_;
};

// n frames sampled from a source video at a fixed dilation.
class DepthSnippet {
public:
    DepthSnippet(int snippet_id, int dilation, std::vector<int> frame_indices, int height,
                 int width, std::vector<float> values);

    int snippet_id() const noexcept { return snippet_id_; }
    int dilation() const noexcept { return dilation_; }
    int length() const noexcept { return static_cast<int>(frame_indices_.size()); }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t frame_size() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    const std::vector<int>& frame_indices() const noexcept { return frame_indices_; }
    std::span<const float> values() const noexcept { return values_; }
    std::span<const float> frame(int slot) const;

private:
    int snippet_id_;
    int dilation_;
    std::vector<int> frame_indices_;
    int height_;
    int width_;
    std::vector<float> values_;
};

// value -> scale * value + shift, with scale > 0.
struct AffineParams {
    double scale = 1.0;
    double shift = 0.0;

    double apply(double value) const noexcept { return scale * value + shift; }
};

// Per-pixel reciprocal; toggles the space tag.
DepthVideo invert(const DepthVideo& video, double eps_inv = kDefaultEpsInv);

// Linear-interpolation percentile (q in [0, 100]) of an unsorted sample.
double percentile(std::vector<double> sample, double q);

struct NormalizedSnippet {
    DepthSnippet snippet;
    // Maps normalized values back to the input range.
    AffineParams inverse;
};

// Jointly maps the [lo_pct, hi_pct] percentile range of all snippet pixels onto [-1, 1].
// Values outside the range are mapped by the same affine function, never clamped.
NormalizedSnippet normalize_snippet(const DepthSnippet& snippet, double lo_pct = 2.0,
                                    double hi_pct = 98.0, double eps_norm = kDefaultEpsNorm);

DepthSnippet apply_affine(const DepthSnippet& snippet, const AffineParams& params);

}  // namespace rollalign
