// Straightforward serial evaluation of the co-alignment objective: materializes every aligned
// prediction, then back-propagates through the per-frame means and normalizers explicitly.

#include <algorithm>
#include <cmath>
#include <string>

#include "rollalign/coalign.hpp"

namespace rollalign {

namespace {

double sgn(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

ObjectiveEvaluation CoalignProblem::evaluate_reference(std::span<const double> log_scale,
                                                       std::span<const double> shift,
                                                       bool with_gradient) const {
    const std::size_t n_t = weights_.size();
    const std::size_t pixels = pixel_index_.size();
    const double eps = config_.eps_inv;
    const bool depth_term = config_.use_depth_space_term;

    ObjectiveEvaluation result;
    std::vector<double> grad_s(n_t, 0.0);
    std::vector<double> grad_t(n_t, 0.0);

    for (int i = 0; i < frame_count(); ++i) {
        const auto& preds = frames_[static_cast<std::size_t>(i)];
        const std::size_t n = preds.size();

        std::vector<std::vector<double>> aligned(n, std::vector<double>(pixels));
        std::vector<std::vector<double>> recip(n, std::vector<double>(pixels));
        for (std::size_t j = 0; j < n; ++j) {
            const auto k = static_cast<std::size_t>(preds[j].snippet_id);
            const double s = std::exp(log_scale[k]);
            for (std::size_t p = 0; p < pixels; ++p) {
                aligned[j][p] = s * preds[j].values[pixel_index_[p]] + shift[k];
                if (aligned[j][p] <= eps) ++result.clamped_reciprocals;
                recip[j][p] = 1.0 / std::max(aligned[j][p], eps);
            }
        }

        std::vector<double> mean(pixels, 0.0);
        std::vector<double> inv_mean(pixels, 0.0);
        for (std::size_t p = 0; p < pixels; ++p) {
            for (std::size_t j = 0; j < n; ++j) {
                mean[p] += aligned[j][p] / static_cast<double>(n);
                inv_mean[p] += recip[j][p] / static_cast<double>(n);
            }
        }
        double mu = 0.0;
        double nu = 0.0;
        for (std::size_t p = 0; p < pixels; ++p) {
            mu += std::abs(mean[p]) / static_cast<double>(pixels);
            nu += std::abs(inv_mean[p]) / static_cast<double>(pixels);
        }
        if (!(mu > 0.0) || (depth_term && !(nu > 0.0)))
            throw DegenerateValue("frame " + std::to_string(i) +
                                  " has zero mean absolute aligned value");

        double loss_a = 0.0;
        double loss_b = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double w = weights_[static_cast<std::size_t>(preds[j].snippet_id)];
            for (std::size_t p = 0; p < pixels; ++p) {
                loss_a += w * std::abs((aligned[j][p] - mean[p]) / mu) / pixels;
                if (depth_term) loss_b += w * std::abs((recip[j][p] - inv_mean[p]) / nu) / pixels;
            }
        }
        result.data_term += loss_a + loss_b;
        if (!with_gradient) continue;

        // Adjoints of the aligned values, the means and the normalizers.
        std::vector<std::vector<double>> d_aligned(n, std::vector<double>(pixels, 0.0));
        std::vector<std::vector<double>> d_recip(n, std::vector<double>(pixels, 0.0));
        std::vector<double> d_mean(pixels, 0.0);
        std::vector<double> d_inv_mean(pixels, 0.0);
        const double d_mu = -loss_a / mu;
        const double d_nu = depth_term ? -loss_b / nu : 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double w = weights_[static_cast<std::size_t>(preds[j].snippet_id)];
            for (std::size_t p = 0; p < pixels; ++p) {
                const double ga = w * sgn(aligned[j][p] - mean[p]) / (mu * pixels);
                d_aligned[j][p] += ga;
                d_mean[p] -= ga;
                if (depth_term) {
                    const double gb = w * sgn(recip[j][p] - inv_mean[p]) / (nu * pixels);
                    d_recip[j][p] += gb;
                    d_inv_mean[p] -= gb;
                }
            }
        }
        for (std::size_t p = 0; p < pixels; ++p) {
            d_mean[p] += d_mu * sgn(mean[p]) / pixels;
            d_inv_mean[p] += d_nu * sgn(inv_mean[p]) / pixels;
        }
        for (std::size_t j = 0; j < n; ++j) {
            const auto k = static_cast<std::size_t>(preds[j].snippet_id);
            const double s = std::exp(log_scale[k]);
            for (std::size_t p = 0; p < pixels; ++p) {
                d_aligned[j][p] += d_mean[p] / n;
                if (depth_term) {
                    d_recip[j][p] += d_inv_mean[p] / n;
                    if (aligned[j][p] > eps)
                        d_aligned[j][p] -= d_recip[j][p] / (aligned[j][p] * aligned[j][p]);
                }
                const double x = preds[j].values[pixel_index_[p]];
                grad_s[k] += d_aligned[j][p] * x * s;
                grad_t[k] += d_aligned[j][p];
            }
        }
    }

    if (with_gradient) {
        result.grad_log_scale = grad_s;
        result.grad_shift = grad_t;
    }
    result.regularizer = regularizer(log_scale, shift, result.grad_log_scale, result.grad_shift);
    result.value = result.data_term + result.regularizer;
    return result;
}

}  // namespace rollalign
