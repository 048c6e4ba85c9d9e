#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "rollalign/core.hpp"
#include "rollalign/scheduler.hpp"

namespace rollalign {

enum class ShiftPenalty { linear_as_printed, quadratic };

std::string_view to_string(ShiftPenalty form);
ShiftPenalty shift_penalty_from_string(std::string_view name);

struct CoalignConfig {
    double lambda1 = 0.1;
    double lambda2 = 10.0;
    int steps = 2000;
    // Exponential decay from learning_rate at step 0 to final_learning_rate at the last step.
    double learning_rate = 3e-2;
    double final_learning_rate = 1e-4;
    // Per-dilation data-term weight. Dilations missing from the map use weight = dilation.
    std::map<int, double> dilation_weights;
    ShiftPenalty shift_penalty = ShiftPenalty::quadratic;
    std::uint64_t seed = 0;
    bool use_depth_space_term = true;
    // Evaluate the objective on every pixel_stride-th pixel per axis.
    int pixel_stride = 1;
    double eps_inv = kDefaultEpsInv;

    double weight_for(int dilation) const;
    double learning_rate_at(int step) const;
    void validate() const;
};

struct AlignmentSolution {
    std::vector<AffineParams> params;
    double final_objective = 0.0;
    // Objective at every optimizer iterate, followed by the objective of the returned params.
    std::vector<double> objective_trace;
    int best_step = 0;
    // Reciprocals guarded by eps_inv while evaluating the returned params.
    std::size_t clamped_reciprocals = 0;
    double learning_rate = 0.0;
    double final_learning_rate = 0.0;
};

struct ObjectiveEvaluation {
    double value = 0.0;
    double data_term = 0.0;
    double regularizer = 0.0;
    // Gradients w.r.t. log-scale and shift per snippet (empty if not requested).
    std::vector<double> grad_log_scale;
    std::vector<double> grad_shift;
    std::size_t clamped_reciprocals = 0;
};

// Snippets bound to a schedule, ready for repeated objective evaluation. The snippets must
// outlive the problem.
class CoalignProblem {
public:
    CoalignProblem(const SnippetSchedule& schedule, std::span<const DepthSnippet> snippets,
                   const CoalignConfig& config);

    int snippet_count() const noexcept { return static_cast<int>(weights_.size()); }
    int frame_count() const noexcept { return static_cast<int>(frames_.size()); }
    std::size_t sampled_pixels() const noexcept { return pixel_index_.size(); }
    const CoalignConfig& config() const noexcept { return config_; }

    // Parallel over frames, deterministic fixed-order reduction.
    ObjectiveEvaluation evaluate(std::span<const double> log_scale, std::span<const double> shift,
                                 bool with_gradient) const;

    // Serial, unfused implementation of the same objective and gradient. Kept for testing and
    // benchmarking the parallel kernel.
    ObjectiveEvaluation evaluate_reference(std::span<const double> log_scale,
                                           std::span<const double> shift,
                                           bool with_gradient) const;

    // The soft constraints on (s, t), counted once per snippet.
    double regularizer(std::span<const double> log_scale, std::span<const double> shift,
                       std::span<double> grad_log_scale, std::span<double> grad_shift) const;

    struct Prediction {
        int snippet_id;
        const float* values;
    };

private:
    struct FrameTerms;
    struct Scratch;

    void evaluate_frame(int frame, std::span<const double> scale, std::span<const double> shift,
                        bool with_gradient, FrameTerms& out, Scratch& scratch) const;
    template <bool with_gradient, bool depth_term>
    void evaluate_frame_impl(int frame, std::span<const double> scale,
                             std::span<const double> shift, FrameTerms& out,
                             Scratch& scratch) const;

    CoalignConfig config_;
    std::vector<double> weights_;
    std::vector<std::vector<Prediction>> frames_;
    std::vector<std::size_t> pixel_index_;
    // Sampled pixels of every prediction, one contiguous (N^i x P) block per frame.
    std::vector<float> samples_;
    std::vector<std::size_t> sample_offset_;
};

// Full co-alignment objective for explicit per-snippet params. Throws DegenerateValue if any
// aligned inverse depth entering the depth-space term is at or below eps_inv.
double objective(const SnippetSchedule& schedule, std::span<const DepthSnippet> snippets,
                 std::span<const AffineParams> params, const CoalignConfig& config);

// Adam from s = 1, t = 0; returns the best-seen parameters.
AlignmentSolution solve(const SnippetSchedule& schedule, std::span<const DepthSnippet> snippets,
                        const CoalignConfig& config);

// Per-frame mean of the aligned predictions covering that frame.
DepthVideo merge(const SnippetSchedule& schedule, std::span<const DepthSnippet> snippets,
                 std::span<const AffineParams> params);

// Verifies snippets match the schedule (ids, frame indices, shapes). Throws ProtocolMismatch.
void check_consistency(const SnippetSchedule& schedule, std::span<const DepthSnippet> snippets);

}  // namespace rollalign
