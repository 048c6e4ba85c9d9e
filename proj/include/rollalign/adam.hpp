#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace rollalign {

struct AdamParameters {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Element-wise Adam state over a flat parameter vector. The learning rate is passed per step
// so callers own the schedule.
class AdamState {
public:
    explicit AdamState(std::size_t size, AdamParameters params = {})
        : params_(params), mom1_(size, 0.0), mom2_(size, 0.0) {}

    void step(std::span<double> x, std::span<const double> grad, double learning_rate) {
        ++t_;
        const double corr1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t_));
        const double corr2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < x.size(); ++i) {
            mom1_[i] = params_.beta1 * mom1_[i] + (1.0 - params_.beta1) * grad[i];
            mom2_[i] = params_.beta2 * mom2_[i] + (1.0 - params_.beta2) * grad[i] * grad[i];
            x[i] -= learning_rate * (mom1_[i] / corr1) /
                    (std::sqrt(mom2_[i] / corr2) + params_.epsilon);
        }
    }

    long long iterations() const noexcept { return t_; }

private:
    AdamParameters params_;
    std::vector<double> mom1_;
    std::vector<double> mom2_;
    long long t_ = 0;
};

}  // namespace rollalign
