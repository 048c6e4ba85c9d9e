#include "rollalign/coalign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <omp.h>

#include "rollalign/adam.hpp"

namespace rollalign {

namespace {

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::string_view to_string(ShiftPenalty form) {
    return form == ShiftPenalty::linear_as_printed ? "linear_as_printed" : "quadratic";
}

ShiftPenalty shift_penalty_from_string(std::string_view name) {
    if (name == "quadratic") return ShiftPenalty::quadratic;
    if (name == "linear_as_printed") return ShiftPenalty::linear_as_printed;
    throw InvalidArgument("unknown shift penalty form '" + std::string(name) + "'");
}

double CoalignConfig::weight_for(int dilation) const {
    const auto it = dilation_weights.find(dilation);
    return it != dilation_weights.end() ? it->second : static_cast<double>(dilation);
}

double CoalignConfig::learning_rate_at(int step) const {
    if (steps <= 1) return learning_rate;
    const double progress = static_cast<double>(step) / static_cast<double>(steps - 1);
    return learning_rate * std::pow(final_learning_rate / learning_rate, progress);
}

void CoalignConfig::validate() const {
    if (steps < 1) throw InvalidArgument("coalign steps must be >= 1");
    if (!(learning_rate > 0.0) || !(final_learning_rate > 0.0))
        throw InvalidArgument("learning rates must be > 0");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
        throw InvalidArgument("regularizer weights must be >= 0");
    for (const auto& [g, w] : dilation_weights)
        if (!(w > 0.0)) throw InvalidArgument("dilation weight for g=" + std::to_string(g) +
                                              " must be > 0");
    if (pixel_stride < 1) throw InvalidArgument("pixel_stride must be >= 1");
    if (!(eps_inv > 0.0)) throw InvalidArgument("eps_inv must be > 0");
}

void check_consistency(const SnippetSchedule& schedule, std::span<const DepthSnippet> snippets) {
    if (static_cast<int>(snippets.size()) != schedule.size())
        throw ProtocolMismatch("schedule lists " + std::to_string(schedule.size()) +
                               " snippets but " + std::to_string(snippets.size()) +
                               " were supplied");
    for (int k = 0; k < schedule.size(); ++k) {
        const auto& spec = schedule.snippet(k);
        const auto& snip = snippets[static_cast<std::size_t>(k)];
        if (snip.snippet_id() != k || snip.frame_indices() != spec.frame_indices ||
            snip.dilation() != spec.dilation)
            throw ProtocolMismatch("snippet " + std::to_string(k) +
                                   " does not match its schedule entry");
        if (snip.height() != snippets.front().height() ||
            snip.width() != snippets.front().width())
            throw ProtocolMismatch("snippet " + std::to_string(k) + " has a different H x W");
    }
}

struct CoalignProblem::FrameTerms {
    double value = 0.0;
    std::size_t clamped = 0;
    bool degenerate = false;
    std::vector<double> grad_scale;
    std::vector<double> grad_shift;
};

struct CoalignProblem::Scratch {
    std::vector<double> mean;
    std::vector<double> inv_mean;
    std::vector<double> sign_sum;
    std::vector<double> inv_sign_sum;
    std::vector<double> recip;
};

CoalignProblem::CoalignProblem(const SnippetSchedule& schedule,
                               std::span<const DepthSnippet> snippets,
                               const CoalignConfig& config)
    : config_(config) {
    config_.validate();
    check_consistency(schedule, snippets);
    schedule.require_full_coverage();

    const int n_t = schedule.size();
    weights_.resize(static_cast<std::size_t>(n_t));
    for (int k = 0; k < n_t; ++k)
        weights_[static_cast<std::size_t>(k)] = config_.weight_for(schedule.snippet(k).dilation);

    frames_.resize(static_cast<std::size_t>(schedule.frames()));
    for (int i = 0; i < schedule.frames(); ++i) {
        for (const auto& slot : schedule.coverage(i)) {
            const auto& snip = snippets[static_cast<std::size_t>(slot.snippet_id)];
            frames_[static_cast<std::size_t>(i)].push_back(
                Prediction{slot.snippet_id, snip.frame(slot.slot).data()});
        }
    }

    const int height = snippets.front().height();
    const int width = snippets.front().width();
    const int stride = config_.pixel_stride;
    for (int y = 0; y < height; y += stride)
        for (int x = 0; x < width; x += stride)
            pixel_index_.push_back(static_cast<std::size_t>(y) * width + x);

    const std::size_t pixels = pixel_index_.size();
    std::size_t total = 0;
    for (const auto& preds : frames_) {
        sample_offset_.push_back(total);
        total += preds.size() * pixels;
    }
    samples_.resize(total);
    for (std::size_t i = 0; i < frames_.size(); ++i) {
        float* dst = samples_.data() + sample_offset_[i];
        for (const auto& pred : frames_[i])
            for (std::size_t p = 0; p < pixels; ++p) *dst++ = pred.values[pixel_index_[p]];
    }
}

double CoalignProblem::regularizer(std::span<const double> log_scale,
                                   std::span<const double> shift,
                                   std::span<double> grad_log_scale,
                                   std::span<double> grad_shift) const {
    double total = 0.0;
    const bool with_gradient = !grad_log_scale.empty();
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        const double s = std::exp(log_scale[k]);
        const double under = std::max(0.0, 1.0 - s);
        double penalty = config_.lambda1 * under * under;
        if (config_.shift_penalty == ShiftPenalty::quadratic)
            penalty += config_.lambda2 * shift[k] * shift[k];
        else
            penalty += config_.lambda2 * shift[k];
        total += penalty;
        if (with_gradient) {
            grad_log_scale[k] += config_.lambda1 * 2.0 * under * (-s);
            grad_shift[k] += config_.shift_penalty == ShiftPenalty::quadratic
                                 ? 2.0 * config_.lambda2 * shift[k]
                                 : config_.lambda2;
        }
    }
    return total;
}

// Per frame i with predictions a_j = s_j x_j + t_j (j < N) over P sampled pixels:
//   L_i = sum_j w_j/P sum_p |a_j - m| / mu  +  sum_j w_j/P sum_p |r_j - m_r| / nu
// with m, m_r the per-pixel means of a_j and r_j = 1/max(a_j, eps), and mu, nu the mean
// absolute values of m and m_r. Loops run prediction-major so the pixel loops vectorize.
void CoalignProblem::evaluate_frame(int frame, std::span<const double> scale,
                                    std::span<const double> shift, bool with_gradient,
                                    FrameTerms& out, Scratch& sc) const {
    const bool depth = config_.use_depth_space_term;
    if (with_gradient && depth)
        evaluate_frame_impl<true, true>(frame, scale, shift, out, sc);
    else if (with_gradient)
        evaluate_frame_impl<true, false>(frame, scale, shift, out, sc);
    else if (depth)
        evaluate_frame_impl<false, true>(frame, scale, shift, out, sc);
    else
        evaluate_frame_impl<false, false>(frame, scale, shift, out, sc);
}

template <bool with_gradient, bool depth_term>
void CoalignProblem::evaluate_frame_impl(int frame, std::span<const double> scale,
                                         std::span<const double> shift, FrameTerms& out,
                                         Scratch& sc) const {
    const auto& preds = frames_[static_cast<std::size_t>(frame)];
    const std::size_t n = preds.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    const std::size_t pixels = pixel_index_.size();
    const double inv_p = 1.0 / static_cast<double>(pixels);
    const double eps = config_.eps_inv;
    const float* block = samples_.data() + sample_offset_[static_cast<std::size_t>(frame)];

    out.value = 0.0;
    out.clamped = 0;
    out.degenerate = false;
    out.grad_scale.assign(with_gradient ? n : 0, 0.0);
    out.grad_shift.assign(with_gradient ? n : 0, 0.0);

    sc.mean.assign(pixels, 0.0);
    sc.inv_mean.assign(pixels, 0.0);
    sc.recip.resize(depth_term ? n * pixels : 0);
    double* mean = sc.mean.data();
    double* inv_mean = sc.inv_mean.data();

    std::size_t clamped = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const int k = preds[j].snippet_id;
        const double s = scale[static_cast<std::size_t>(k)];
        const double t = shift[static_cast<std::size_t>(k)];
        const float* x = block + j * pixels;
        double* r = depth_term ? sc.recip.data() + j * pixels : nullptr;
#pragma omp simd reduction(+ : clamped)
        for (std::size_t p = 0; p < pixels; ++p) {
            const double a = s * x[p] + t;
            mean[p] += a * inv_n;
            if constexpr (depth_term) {
                clamped += a <= eps ? 1 : 0;
                r[p] = 1.0 / (a > eps ? a : eps);
                inv_mean[p] += r[p] * inv_n;
            }
        }
    }
    out.clamped = clamped;

    double abs_mean_sum = 0.0;
    double abs_inv_mean_sum = 0.0;
#pragma omp simd reduction(+ : abs_mean_sum, abs_inv_mean_sum)
    for (std::size_t p = 0; p < pixels; ++p) {
        abs_mean_sum += std::abs(mean[p]);
        abs_inv_mean_sum += std::abs(inv_mean[p]);
    }
    const double mu = abs_mean_sum * inv_p;
    const double nu = abs_inv_mean_sum * inv_p;
    if (!(mu > 0.0) || (depth_term && !(nu > 0.0))) {
        out.degenerate = true;
        return;
    }

    // Weighted absolute residuals, and per-pixel sums of weighted residual signs.
    if (with_gradient) {
        sc.sign_sum.assign(pixels, 0.0);
        sc.inv_sign_sum.assign(pixels, 0.0);
    }
    double* sign_sum = sc.sign_sum.data();
    double* inv_sign_sum = sc.inv_sign_sum.data();
    double sum_a = 0.0;
    double sum_b = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const int k = preds[j].snippet_id;
        const double s = scale[static_cast<std::size_t>(k)];
        const double t = shift[static_cast<std::size_t>(k)];
        const double w = weights_[static_cast<std::size_t>(k)];
        const float* x = block + j * pixels;
        const double* r = depth_term ? sc.recip.data() + j * pixels : nullptr;
        double acc_a = 0.0;
        double acc_b = 0.0;
#pragma omp simd reduction(+ : acc_a, acc_b)
        for (std::size_t p = 0; p < pixels; ++p) {
            const double e = s * x[p] + t - mean[p];
            acc_a += std::abs(e);
            if constexpr (with_gradient) sign_sum[p] += w * sign(e);
            if constexpr (depth_term) {
                const double f = r[p] - inv_mean[p];
                acc_b += std::abs(f);
                if constexpr (with_gradient) inv_sign_sum[p] += w * sign(f);
            }
        }
        sum_a += w * acc_a;
        sum_b += w * acc_b;
    }

    const double coef_a = inv_p / mu;
    const double coef_b = depth_term ? inv_p / nu : 0.0;
    const double loss_a = sum_a * coef_a;
    const double loss_b = sum_b * coef_b;
    out.value = loss_a + loss_b;
    if constexpr (!with_gradient) return;

    // The normalizers depend on every prediction: d mu / d a_j(p) = sgn(m(p)) / (P N).
    const double through_mu = -loss_a / mu * inv_p * inv_n;
    const double through_nu = depth_term ? -loss_b / nu * inv_p * inv_n : 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const int k = preds[j].snippet_id;
        const double s = scale[static_cast<std::size_t>(k)];
        const double t = shift[static_cast<std::size_t>(k)];
        const double w = weights_[static_cast<std::size_t>(k)];
        const float* x = block + j * pixels;
        const double* r = depth_term ? sc.recip.data() + j * pixels : nullptr;
        double g_scale = 0.0;
        double g_shift = 0.0;
#pragma omp simd reduction(+ : g_scale, g_shift)
        for (std::size_t p = 0; p < pixels; ++p) {
            const double a = s * x[p] + t;
            double da = (w * sign(a - mean[p]) - sign_sum[p] * inv_n) * coef_a +
                        sign(mean[p]) * through_mu;
            if constexpr (depth_term) {
                const double dr = a > eps ? -r[p] * r[p] : 0.0;
                da += ((w * sign(r[p] - inv_mean[p]) - inv_sign_sum[p] * inv_n) * coef_b +
                       sign(inv_mean[p]) * through_nu) *
                      dr;
            }
            g_scale += da * x[p];
            g_shift += da;
        }
        out.grad_scale[j] = g_scale;
        out.grad_shift[j] = g_shift;
    }
}

ObjectiveEvaluation CoalignProblem::evaluate(std::span<const double> log_scale,
                                             std::span<const double> shift,
                                             bool with_gradient) const {
    const std::size_t n_t = weights_.size();
    std::vector<double> scale(n_t);
    for (std::size_t k = 0; k < n_t; ++k) scale[k] = std::exp(log_scale[k]);

    const int n_f = frame_count();
    std::vector<FrameTerms> terms(static_cast<std::size_t>(n_f));

#pragma omp parallel
    {
        Scratch scratch;
#pragma omp for schedule(static)
        for (int i = 0; i < n_f; ++i)
            evaluate_frame(i, scale, shift, with_gradient, terms[static_cast<std::size_t>(i)],
                           scratch);
    }

    ObjectiveEvaluation result;
    if (with_gradient) {
        result.grad_log_scale.assign(n_t, 0.0);
        result.grad_shift.assign(n_t, 0.0);
    }
    for (int i = 0; i < n_f; ++i) {
        const auto& ft = terms[static_cast<std::size_t>(i)];
        if (ft.degenerate)
            throw DegenerateValue("frame " + std::to_string(i) +
                                  " has zero mean absolute aligned value");
        result.data_term += ft.value;
        result.clamped_reciprocals += ft.clamped;
        if (!with_gradient) continue;
        const auto& preds = frames_[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < preds.size(); ++j) {
            const auto k = static_cast<std::size_t>(preds[j].snippet_id);
            result.grad_log_scale[k] += ft.grad_scale[j] * scale[k];
            result.grad_shift[k] += ft.grad_shift[j];
        }
    }
    result.regularizer = regularizer(log_scale, shift, result.grad_log_scale, result.grad_shift);
    result.value = result.data_term + result.regularizer;
    return result;
}

double objective(const SnippetSchedule& schedule, std::span<const DepthSnippet> snippets,
                 std::span<const AffineParams> params, const CoalignConfig& config) {
    const CoalignProblem problem(schedule, snippets, config);
    if (static_cast<int>(params.size()) != problem.snippet_count())
        throw InvalidArgument("expected one AffineParams per snippet");
    std::vector<double> log_scale(params.size());
    std::vector<double> shift(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!(params[k].scale > 0.0)) throw InvalidArgument("snippet scale must be > 0");
        log_scale[k] = std::log(params[k].scale);
        shift[k] = params[k].shift;
    }
    const auto eval = problem.evaluate(log_scale, shift, false);
    if (eval.clamped_reciprocals > 0)
        throw DegenerateValue(std::to_string(eval.clamped_reciprocals) +
                              " aligned inverse depth value(s) at or below eps_inv");
    return eval.value;
}

AlignmentSolution solve(const SnippetSchedule& schedule, std::span<const DepthSnippet> snippets,
                        const CoalignConfig& config) {
    const CoalignProblem problem(schedule, snippets, config);
    const auto n_t = static_cast<std::size_t>(problem.snippet_count());

    // [log s_0 .. log s_{N-1}, t_0 .. t_{N-1}], starting from s = 1, t = 0.
    std::vector<double> theta(2 * n_t, 0.0);
    std::vector<double> grad(2 * n_t, 0.0);
    std::vector<double> best = theta;
    const std::span<const double> log_scale(theta.data(), n_t);
    const std::span<const double> shift(theta.data() + n_t, n_t);

    AlignmentSolution solution;
    solution.learning_rate = config.learning_rate;
    solution.final_learning_rate = config.final_learning_rate;
    solution.objective_trace.reserve(static_cast<std::size_t>(config.steps) + 1);

    double best_value = std::numeric_limits<double>::infinity();
    std::size_t best_clamped = 0;
    AdamState adam(theta.size());

    auto check_finite = [](const ObjectiveEvaluation& eval, int step) {
        if (!std::isfinite(eval.value))
            throw NonFinite("objective became non-finite at step " + std::to_string(step), step);
        for (std::size_t k = 0; k < eval.grad_shift.size(); ++k)
            if (!std::isfinite(eval.grad_log_scale[k]) || !std::isfinite(eval.grad_shift[k]))
                throw NonFinite("gradient became non-finite at step " + std::to_string(step),
                                step);
    };

    for (int step = 0; step <= config.steps; ++step) {
        const bool last = step == config.steps;
        ObjectiveEvaluation eval;
        try {
            eval = problem.evaluate(log_scale, shift, !last);
        } catch (const DegenerateValue& e) {
            throw NonFinite(std::string(e.what()) + " at step " + std::to_string(step), step);
        }
        check_finite(eval, step);
        if (eval.value < best_value) {
            best_value = eval.value;
            best_clamped = eval.clamped_reciprocals;
            best = theta;
            solution.best_step = step;
        }
        if (last) break;
        solution.objective_trace.push_back(eval.value);

        std::copy(eval.grad_log_scale.begin(), eval.grad_log_scale.end(), grad.begin());
        std::copy(eval.grad_shift.begin(), eval.grad_shift.end(),
                  grad.begin() + static_cast<std::ptrdiff_t>(n_t));
        adam.step(theta, grad, config.learning_rate_at(step));
    }

    solution.params.resize(n_t);
    for (std::size_t k = 0; k < n_t; ++k)
        solution.params[k] = AffineParams{std::exp(best[k]), best[n_t + k]};
    solution.final_objective = best_value;
    solution.clamped_reciprocals = best_clamped;
    solution.objective_trace.push_back(best_value);
    return solution;
}

DepthVideo merge(const SnippetSchedule& schedule, std::span<const DepthSnippet> snippets,
                 std::span<const AffineParams> params) {
    check_consistency(schedule, snippets);
    schedule.require_full_coverage();
    if (static_cast<int>(params.size()) != schedule.size())
        throw InvalidArgument("expected one AffineParams per snippet");

    const int n_f = schedule.frames();
    const int height = snippets.front().height();
    const int width = snippets.front().width();
    const std::size_t frame_size = snippets.front().frame_size();
    std::vector<float> out(static_cast<std::size_t>(n_f) * frame_size);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_f; ++i) {
        const auto cover = schedule.coverage(i);
        const double inv_n = 1.0 / static_cast<double>(cover.size());
        std::vector<std::pair<const float*, AffineParams>> sources;
        for (const auto& slot : cover) {
            const auto k = static_cast<std::size_t>(slot.snippet_id);
            sources.emplace_back(snippets[k].frame(slot.slot).data(), params[k]);
        }
        float* dst = out.data() + static_cast<std::size_t>(i) * frame_size;
        for (std::size_t p = 0; p < frame_size; ++p) {
            double sum = 0.0;
            for (const auto& [values, prm] : sources) sum += prm.apply(values[p]);
            dst[p] = static_cast<float>(sum * inv_n);
        }
    }
    return DepthVideo(n_f, height, width, std::move(out), SpaceTag::inverse_depth);
}

}  // namespace rollalign
