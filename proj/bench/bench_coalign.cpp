// Times the parallel co-alignment kernel against the serial reference on a synthetic instance.
//   bench_coalign [frames] [height] [width] [repeats]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include <omp.h>

#include "rollalign/coalign.hpp"
#include "rollalign/synth.hpp"

using namespace rollalign;

namespace {

template <class F>
double best_of(int repeats, F&& f) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    const int frames = argc > 1 ? std::atoi(argv[1]) : 120;
    const int height = argc > 2 ? std::atoi(argv[2]) : 64;
    const int width = argc > 3 ? std::atoi(argv[3]) : 96;
    const int repeats = argc > 4 ? std::atoi(argv[4]) : 5;

    SceneSpec scene;
    scene.kind = SceneKind::depth_range_jump;
    scene.frames = frames;
    scene.height = height;
    scene.width = width;
    scene.seed = 1;
    const auto generated = generate(scene);
    const int dil[] = {1, 10, 25};
    const auto schedule = build_schedule(frames, 3, dil, 1);
    CorruptionSpec corruption;
    corruption.scale_lo = 0.5;
    corruption.scale_hi = 2.0;
    corruption.shift_lo = -0.2;
    corruption.shift_hi = 0.2;
    corruption.noise_sigma = 0.01;
    corruption.seed = 7;
    const auto snippets = corrupt(generated.inverse_depth, schedule, corruption).snippets;

    const CoalignProblem problem(schedule, snippets, CoalignConfig{});
    const std::vector<double> log_scale(snippets.size(), 0.0), shift(snippets.size(), 0.0);

    ObjectiveEvaluation fast, slow;
    const double t_ref = best_of(repeats, [&] { slow = problem.evaluate_reference(log_scale, shift, true); });
    std::printf("frames=%d size=%dx%d snippets=%d threads=%d\n", frames, height, width, schedule.size(),
                omp_get_max_threads());
    std::printf("reference (serial)   %9.3f ms\n", 1e3 * t_ref);
    for (int threads = 1; threads <= omp_get_num_procs(); threads *= 2) {
        omp_set_num_threads(threads);
        const double t = best_of(repeats, [&] { fast = problem.evaluate(log_scale, shift, true); });
        std::printf("kernel  %2d thread(s) %9.3f ms  speedup %.2fx\n", threads, 1e3 * t, t_ref / t);
    }
    double max_grad_diff = 0.0;
    for (std::size_t k = 0; k < fast.grad_shift.size(); ++k) {
        max_grad_diff = std::max(max_grad_diff, std::abs(fast.grad_shift[k] - slow.grad_shift[k]));
        max_grad_diff = std::max(max_grad_diff, std::abs(fast.grad_log_scale[k] - slow.grad_log_scale[k]));
    }
    std::printf("objective diff %.3g, max gradient diff %.3g\n", std::abs(fast.value - slow.value), max_grad_diff);
    return 0;
}
