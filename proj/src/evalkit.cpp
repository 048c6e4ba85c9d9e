#include "rollalign/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rollalign {

FlowField::FlowField(int pairs, int height, int width, std::vector<float> displacement,
                     std::vector<std::uint8_t> valid)
    : pairs_(pairs),
      height_(height),
      width_(width),
      displacement_(std::move(displacement)),
      valid_(std::move(valid)) {
    if (pairs < 0 || height < 1 || width < 1) throw InvalidArgument("invalid flow dimensions");
    const auto expected = static_cast<std::size_t>(pairs) * 2 * frame_size();
    if (displacement_.size() != expected)
        throw InvalidArgument("flow value count does not match (N_F-1) x 2 x H x W");
    if (!valid_.empty() && valid_.size() != static_cast<std::size_t>(pairs) * frame_size())
        throw InvalidArgument("flow mask size does not match (N_F-1) x H x W");
    for (float v : displacement_)
        if (!std::isfinite(v)) throw InvalidArgument("flow contains non-finite displacements");
}

FlowField FlowField::zeros(int pairs, int height, int width) {
    return FlowField(pairs, height, width,
                     std::vector<float>(static_cast<std::size_t>(pairs) * 2 *
                                        static_cast<std::size_t>(height) * width,
                                        0.0f));
}

namespace {

double to_inverse(double v, SpaceTag tag) { return tag == SpaceTag::depth ? 1.0 / v : v; }
double to_depth(double v, SpaceTag tag) { return tag == SpaceTag::depth ? v : 1.0 / v; }

void require_same_shape(const DepthVideo& a, const DepthVideo& b) {
    if (!a.same_shape(b)) throw InvalidArgument("prediction and ground truth shapes differ");
}

// gt <= 0, non-finite gt or user-masked pixels are excluded.
std::vector<std::uint8_t> valid_pixels(const DepthVideo& gt, const PixelMask* mask) {
    const auto values = gt.values();
    if (mask && mask->size() != values.size())
        throw InvalidArgument("mask size does not match the video");
    std::vector<std::uint8_t> valid(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        valid[i] = std::isfinite(values[i]) && values[i] > 0.0f && (!mask || (*mask)[i] != 0);
    return valid;
}

struct ErrorSums {
    double rel = 0.0;
    std::size_t inliers = 0;
    std::size_t count = 0;
};

// Per-frame partial sums reduced in frame order, so results do not depend on thread count.
template <typename PredDepth>
ErrorSums error_sums(int frames, std::size_t frame_size, PredDepth&& pred_depth,
                     const DepthVideo& gt, const std::vector<std::uint8_t>& valid) {
    std::vector<ErrorSums> partial(static_cast<std::size_t>(frames));
    const auto gt_values = gt.values();
#pragma omp parallel for schedule(static)
    for (int f = 0; f < frames; ++f) {
        ErrorSums acc;
        const std::size_t base = static_cast<std::size_t>(f) * frame_size;
        for (std::size_t p = 0; p < frame_size; ++p) {
            const std::size_t i = base + p;
            if (!valid[i]) continue;
            const double d = to_depth(gt_values[i], gt.space());
            const double d_hat = pred_depth(i);
            acc.rel += std::abs(d_hat - d) / d;
            const double ratio = std::max(d_hat / d, d / d_hat);
            if (d_hat > 0.0 && ratio < 1.25) ++acc.inliers;
            ++acc.count;
        }
        partial[static_cast<std::size_t>(f)] = acc;
    }
    ErrorSums total;
    for (const auto& acc : partial) {
        total.rel += acc.rel;
        total.inliers += acc.inliers;
        total.count += acc.count;
    }
    if (total.count == 0) throw EmptyMask("no valid pixel to evaluate");
    return total;
}

ErrorSums direct_error_sums(const DepthVideo& pred_depth, const DepthVideo& gt_depth,
                            const PixelMask* mask) {
    require_same_shape(pred_depth, gt_depth);
    const auto valid = valid_pixels(gt_depth, mask);
    const auto pred = pred_depth.values();
    const SpaceTag tag = pred_depth.space();
    return error_sums(
        gt_depth.frames(), gt_depth.frame_size(),
        [&](std::size_t i) { return to_depth(pred[i], tag); }, gt_depth, valid);
}

LinearFit fit_inverse(const DepthVideo& pred, const DepthVideo& gt,
                      const std::vector<std::uint8_t>& valid) {
    const int frames = gt.frames();
    const std::size_t frame_size = gt.frame_size();
    const auto x_values = pred.values();
    const auto y_values = gt.values();

    struct Moments {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        std::size_t n = 0;
    };
    auto reduce = [&](double mx, double my) {
        std::vector<Moments> partial(static_cast<std::size_t>(frames));
#pragma omp parallel for schedule(static)
        for (int f = 0; f < frames; ++f) {
            Moments m;
            const std::size_t base = static_cast<std::size_t>(f) * frame_size;
            for (std::size_t p = 0; p < frame_size; ++p) {
                const std::size_t i = base + p;
                if (!valid[i]) continue;
                const double x = to_inverse(x_values[i], pred.space()) - mx;
                const double y = to_inverse(y_values[i], gt.space()) - my;
                m.sx += x;
                m.sy += y;
                m.sxx += x * x;
                m.sxy += x * y;
                ++m.n;
            }
            partial[static_cast<std::size_t>(f)] = m;
        }
        Moments total;
        for (const auto& m : partial) {
            total.sx += m.sx;
            total.sy += m.sy;
            total.sxx += m.sxx;
            total.sxy += m.sxy;
            total.n += m.n;
        }
        return total;
    };

    // Two passes: means, then moments of the centered data.
    const Moments raw = reduce(0.0, 0.0);
    if (raw.n < 2) throw SingularFit("least-squares fit needs at least two valid pixels");
    const double n = static_cast<double>(raw.n);
    const double mx = raw.sx / n;
    const double my = raw.sy / n;
    const Moments c = reduce(mx, my);
    const double var_x = (c.sxx - c.sx * c.sx / n) / n;
    const double tol = 1e-9 * std::max(std::abs(mx), std::sqrt(raw.sxx / n));
    if (!(var_x > tol * tol))
        throw SingularFit("prediction is constant over the valid pixels");
    const double scale = (c.sxy - c.sx * c.sy / n) / (c.sxx - c.sx * c.sx / n);
    const double shift = (my + c.sy / n) - scale * (mx + c.sx / n);
    return LinearFit{scale, shift, raw.n};
}

double sample(std::span<const float> frame, int height, int width, double x, double y,
              Sampling sampling) {
    if (sampling == Sampling::nearest) {
        const int xi = static_cast<int>(std::lround(x));
        const int yi = static_cast<int>(std::lround(y));
        return frame[static_cast<std::size_t>(yi) * width + xi];
    }
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    auto at = [&](int yy, int xx) {
        return static_cast<double>(frame[static_cast<std::size_t>(yy) * width + xx]);
    };
    return (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1)) +
           fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1));
}

double mean_abs(std::span<const float> frame) {
    double sum = 0.0;
    for (float v : frame) sum += std::abs(static_cast<double>(v));
    return sum / static_cast<double>(frame.size());
}

}  // namespace

LinearFit ls_align(const DepthVideo& pred, const DepthVideo& gt, const PixelMask* mask) {
    require_same_shape(pred, gt);
    return fit_inverse(pred, gt, valid_pixels(gt, mask));
}

double abs_rel(const DepthVideo& pred_depth, const DepthVideo& gt_depth, const PixelMask* mask) {
    const auto sums = direct_error_sums(pred_depth, gt_depth, mask);
    return sums.rel / static_cast<double>(sums.count);
}

double delta1(const DepthVideo& pred_depth, const DepthVideo& gt_depth, const PixelMask* mask) {
    const auto sums = direct_error_sums(pred_depth, gt_depth, mask);
    return static_cast<double>(sums.inliers) / static_cast<double>(sums.count);
}

OpwResult opw(const DepthVideo& video, const FlowField& flow, Sampling sampling) {
    if (flow.pairs() != video.frames() - 1 || flow.height() != video.height() ||
        flow.width() != video.width())
        throw InvalidArgument("flow shape does not match the video");
    const int height = video.height();
    const int width = video.width();
    const std::size_t frame_size = video.frame_size();

    std::vector<double> norms(static_cast<std::size_t>(video.frames()));
    for (int f = 0; f < video.frames(); ++f) {
        norms[static_cast<std::size_t>(f)] = mean_abs(video.frame(f));
        if (!(norms[static_cast<std::size_t>(f)] > 0.0))
            throw DegenerateValue("frame " + std::to_string(f) + " has zero mean absolute value");
    }

    std::vector<double> sums(static_cast<std::size_t>(flow.pairs()), 0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(flow.pairs()), 0);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < flow.pairs(); ++t) {
        const auto cur = video.frame(t);
        const auto next = video.frame(t + 1);
        // One scale per pair, so a video transported exactly by its flow scores zero.
        const double norm =
            0.5 * (norms[static_cast<std::size_t>(t)] + norms[static_cast<std::size_t>(t) + 1]);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t p = 0; p < frame_size; ++p) {
            if (!flow.is_valid(t, p)) continue;
            const double x = static_cast<double>(p % width) + flow.dx(t, p);
            const double y = static_cast<double>(p / width) + flow.dy(t, p);
            if (sampling == Sampling::nearest) {
                if (std::lround(x) < 0 || std::lround(x) > width - 1 || std::lround(y) < 0 ||
                    std::lround(y) > height - 1)
                    continue;
            } else if (x < 0.0 || x > width - 1 || y < 0.0 || y > height - 1) {
                continue;
            }
            const double warped = sample(next, height, width, x, y, sampling);
            sum += std::abs(cur[p] - warped) / norm;
            ++count;
        }
        sums[static_cast<std::size_t>(t)] = sum;
        counts[static_cast<std::size_t>(t)] = count;
    }

    OpwResult result;
    double total = 0.0;
    for (std::size_t t = 0; t < sums.size(); ++t) {
        total += sums[t];
        result.count += counts[t];
    }
    if (result.count == 0) throw EmptyMask("no pixel survives flow masking and bounds checks");
    result.raw = total / static_cast<double>(result.count);
    return result;
}

MetricsReport evaluate(const DepthVideo& pred, const DepthVideo& gt, const FlowField* flow,
                       const PixelMask* mask, const EvalOptions& options) {
    require_same_shape(pred, gt);
    const auto valid = valid_pixels(gt, mask);
    const LinearFit fit = fit_inverse(pred, gt, valid);

    const auto pred_values = pred.values();
    std::vector<double> aligned_depth(pred_values.size());
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < pred_values.size(); ++i) {
        const double inv = fit.scale * to_inverse(pred_values[i], pred.space()) + fit.shift;
        if (inv <= options.eps_inv) ++clamped;
        aligned_depth[i] = 1.0 / std::max(inv, options.eps_inv);
    }

    const auto sums = error_sums(
        gt.frames(), gt.frame_size(), [&](std::size_t i) { return aligned_depth[i]; }, gt, valid);

    MetricsReport report;
    report.abs_rel = sums.rel / static_cast<double>(sums.count);
    report.delta1 = static_cast<double>(sums.inliers) / static_cast<double>(sums.count);
    report.scale = fit.scale;
    report.shift = fit.shift;
    report.valid_pixels = sums.count;
    report.clamped = clamped;
    if (flow) {
        std::vector<float> as_float(aligned_depth.begin(), aligned_depth.end());
        const DepthVideo aligned(pred.frames(), pred.height(), pred.width(),
                                 std::move(as_float), SpaceTag::depth);
        report.opw = opw(aligned, *flow, options.sampling);
    }
    return report;
}

}  // namespace rollalign
