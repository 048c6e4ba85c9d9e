#include "rollalign/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rollalign {

std::string_view to_string(SpaceTag tag) {
    return tag == SpaceTag::depth ? "depth" : "inverse_depth";
}

SpaceTag space_tag_from_string(std::string_view name) {
    if (name == "depth") return SpaceTag::depth;
    if (name == "inverse_depth") return SpaceTag::inverse_depth;
    throw InvalidArgument("unknown space tag '" + std::string(name) + "'");
}

DepthVideo::DepthVideo(int frames, int height, int width, std::vector<float> values,
                       SpaceTag tag)
    : frames_(frames), height_(height), width_(width), tag_(tag), values_(std::move(values)) {
    if (frames < 1 || height < 1 || width < 1)
        throw InvalidArgument("depth video dimensions must be >= 1");
    if (values_.size() != static_cast<std::size_t>(frames) * frame_size())
        throw InvalidArgument("depth video value count does not match N_F x H x W");
    for (float v : values_) {
        if (!std::isfinite(v)) throw InvalidArgument("depth video contains non-finite values");
        if (tag_ == SpaceTag::depth && !(v > 0.0f))
            throw InvalidArgument("depth-space video must be strictly positive");
    }
}

DepthVideo DepthVideo::filled(int frames, int height, int width, float value, SpaceTag tag) {
    const auto count = static_cast<std::size_t>(std::max(frames, 0)) *
                       static_cast<std::size_t>(std::max(height, 0)) *
                       static_cast<std::size_t>(std::max(width, 0));
    return DepthVideo(frames, height, width, std::vector<float>(count, value), tag);
}

std::span<const float> DepthVideo::frame(int i) const {
    if (i < 0 || i >= frames_) throw InvalidArgument("frame index out of range");
    return std::span<const float>(values_).subspan(static_cast<std::size_t>(i) * frame_size(),
                                                   frame_size());
}

DepthSnippet::DepthSnippet(int snippet_id, int dilation, std::vector<int> frame_indices,
                           int height, int width, std::vector<float> values)
    : snippet_id_(snippet_id),
      dilation_(dilation),
      frame_indices_(std::move(frame_indices)),
      height_(height),
      width_(width),
      values_(std::move(values)) {
    if (frame_indices_.empty()) throw InvalidArgument("snippet must hold at least one frame");
    if (dilation_ < 1) throw InvalidArgument("snippet dilation must be >= 1");
    if (height_ < 1 || width_ < 1) throw InvalidArgument("snippet dimensions must be >= 1");
    if (frame_indices_.front() < 0) throw InvalidArgument("snippet frame index below 0");
    for (std::size_t m = 1; m < frame_indices_.size(); ++m) {
        if (frame_indices_[m] - frame_indices_[m - 1] != dilation_)
            throw InvalidArgument("snippet frame indices must be spaced by the dilation");
    }
    if (values_.size() != frame_indices_.size() * frame_size())
        throw InvalidArgument("snippet value count does not match n x H x W");
    for (float v : values_)
        if (!std::isfinite(v)) throw InvalidArgument("snippet contains non-finite values");
}

std::span<const float> DepthSnippet::frame(int slot) const {
    if (slot < 0 || slot >= length()) throw InvalidArgument("snippet slot out of range");
    return std::span<const float>(values_).subspan(static_cast<std::size_t>(slot) * frame_size(),
                                                   frame_size());
}

DepthVideo invert(const DepthVideo& video, double eps_inv) {
    std::vector<float> out(video.values().size());
    const auto in = video.values();
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (!(in[i] > eps_inv))
            throw DegenerateValue("cannot invert pixel value " + std::to_string(in[i]) +
                                  " (must exceed eps_inv)");
        out[i] = static_cast<float>(1.0 / static_cast<double>(in[i]));
    }
    const SpaceTag toggled =
        video.space() == SpaceTag::depth ? SpaceTag::inverse_depth : SpaceTag::depth;
    return DepthVideo(video.frames(), video.height(), video.width(), std::move(out), toggled);
}

double percentile(std::vector<double> sample, double q) {
    if (sample.empty()) throw InvalidArgument("percentile of an empty sample");
    if (!(q >= 0.0 && q <= 100.0)) throw InvalidArgument("percentile must lie in [0, 100]");
    const double rank = q / 100.0 * static_cast<double>(sample.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sample.size() - 1);
    std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(lo),
                     sample.end());
    const double lo_value = sample[lo];
    if (hi == lo) return lo_value;
    // The (lo+1)-th order statistic is the minimum of the upper partition.
    const double hi_value =
        *std::min_element(sample.begin() + static_cast<std::ptrdiff_t>(hi), sample.end());
    return lo_value + (rank - static_cast<double>(lo)) * (hi_value - lo_value);
}

NormalizedSnippet normalize_snippet(const DepthSnippet& snippet, double lo_pct, double hi_pct,
                                    double eps_norm) {
    if (!(lo_pct < hi_pct)) throw InvalidArgument("lo_pct must be below hi_pct");
    const auto values = snippet.values();
    std::vector<double> sample(values.begin(), values.end());
    const double p_lo = percentile(sample, lo_pct);
    const double p_hi = percentile(std::move(sample), hi_pct);
    const double spread = p_hi - p_lo;
    if (!(spread > eps_norm))
        throw DegenerateValue("percentile spread " + std::to_string(spread) +
                              " too small to normalize snippet");

    // y = (x - center) / half_spread maps [p_lo, p_hi] onto [-1, 1].
    const double center = 0.5 * (p_lo + p_hi);
    const double half_spread = 0.5 * spread;
    std::vector<float> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = static_cast<float>((static_cast<double>(values[i]) - center) / half_spread);

    return NormalizedSnippet{
        DepthSnippet(snippet.snippet_id(), snippet.dilation(), snippet.frame_indices(),
                     snippet.height(), snippet.width(), std::move(out)),
        AffineParams{half_spread, center}};
}

DepthSnippet apply_affine(const DepthSnippet& snippet, const AffineParams& params) {
    const auto values = snippet.values();
    std::vector<float> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = static_cast<float>(params.apply(values[i]));
    return DepthSnippet(snippet.snippet_id(), snippet.dilation(), snippet.frame_indices(),
                        snippet.height(), snippet.width(), std::move(out));
}

}  // namespace rollalign
