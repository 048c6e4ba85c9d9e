// Acceptance suite: one PASS/FAIL line per primary criterion; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <stdexcept>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <omp.h>

#include "rollalign/coalign.hpp"
#include "rollalign/evalkit.hpp"
#include "rollalign/io.hpp"
#include "rollalign/refine.hpp"
#include "rollalign/synth.hpp"

using namespace rollalign;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

// Runs one criterion; an escaping exception counts as a failure.
void criterion(const std::string& name, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c, d);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- oracle recovery ----

struct OracleRun {
    MetricsReport solved;
    MetricsReport unaligned;
    double solve_seconds = 0.0;
};

OracleRun oracle_run(double sigma) {
    SceneSpec scene;
    scene.kind = SceneKind::depth_range_jump;
    scene.frames = 120;
    scene.height = 64;
    scene.width = 96;
    scene.seed = 1;
    const auto generated = generate(scene);
    const int dil[] = {1, 10, 25};
    const auto schedule = build_schedule(120, 3, dil, 1);

    CorruptionSpec corruption;
    corruption.scale_lo = 0.5;
    corruption.scale_hi = 2.0;
    corruption.shift_lo = -0.2;
    corruption.shift_hi = 0.2;
    corruption.noise_sigma = sigma;
    corruption.seed = 7;
    const auto corrupted = corrupt(generated.inverse_depth, schedule, corruption);

    CoalignConfig config;
    config.pixel_stride = 4;
    const int saved_threads = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto t0 = std::chrono::steady_clock::now();
    const auto solution = solve(schedule, corrupted.snippets, config);
    OracleRun run;
    run.solve_seconds = seconds_since(t0);
    omp_set_num_threads(saved_threads);

    const auto gt_depth = invert(generated.inverse_depth);
    run.solved = evaluate(merge(schedule, corrupted.snippets, solution.params), gt_depth);
    const std::vector<AffineParams> identity(static_cast<std::size_t>(schedule.size()));
    run.unaligned = evaluate(merge(schedule, corrupted.snippets, identity), gt_depth);
    return run;
}

// ---- ablation over dilation sets ----

double ablation_abs_rel(const std::vector<int>& dilations) {
    SceneSpec scene;
    scene.kind = SceneKind::translating_plane;
    scene.frames = 250;
    scene.height = 32;
    scene.width = 48;
    scene.seed = 3;
    const auto generated = generate(scene);
    const auto schedule = build_schedule(250, 3, dilations, 1);
    CorruptionSpec corruption;
    corruption.shift_lo = -0.05;
    corruption.shift_hi = 0.05;
    corruption.drift = 0.05;
    corruption.seed = 11;
    const auto corrupted = corrupt(generated.inverse_depth, schedule, corruption);
    CoalignConfig config;
    config.pixel_stride = 2;
    const auto solution = solve(schedule, corrupted.snippets, config);
    return evaluate(merge(schedule, corrupted.snippets, solution.params), invert(generated.inverse_depth))
        .abs_rel;
}

// ---- gradient check ----

// Smallest distance of any aligned value or reciprocal to its frame mean; FD steps well below
// this never cross a kink of the absolute values.
double min_residual(const SnippetSchedule& schedule, const std::vector<DepthSnippet>& snippets,
                    const std::vector<double>& log_scale, const std::vector<double>& shift) {
    const std::size_t pixels = snippets.front().frame_size();
    double smallest = 1e300;
    for (int i = 0; i < schedule.frames(); ++i) {
        const auto cov = schedule.coverage(i);
        for (std::size_t p = 0; p < pixels; ++p) {
            std::vector<double> a;
            for (const auto& c : cov) {
                const auto k = static_cast<std::size_t>(c.snippet_id);
                a.push_back(std::exp(log_scale[k]) * snippets[k].frame(c.slot)[p] + shift[k]);
            }
            double m = 0.0, mr = 0.0;
            for (double v : a) {
                m += v / static_cast<double>(a.size());
                mr += 1.0 / v / static_cast<double>(a.size());
            }
            for (double v : a)
                smallest = std::min({smallest, std::abs(v - m), std::abs(1.0 / v - mr)});
        }
    }
    return smallest;
}

void gradient_check() {
    SceneSpec scene;
    scene.kind = SceneKind::orbiting_sphere_field;
    scene.frames = 8;
    scene.height = 4;
    scene.width = 4;
    scene.seed = 2;
    const auto generated = generate(scene);
    const int dil[] = {1, 2};
    const auto schedule = build_schedule(8, 3, dil, 1);
    CorruptionSpec corruption;
    corruption.scale_lo = 0.7;
    corruption.scale_hi = 1.4;
    corruption.shift_lo = -0.1;
    corruption.shift_hi = 0.1;
    corruption.noise_sigma = 0.02;
    corruption.seed = 4;
    const auto snippets = corrupt(generated.inverse_depth, schedule, corruption).snippets;
    CoalignConfig config;
    const CoalignProblem problem(schedule, snippets, config);

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> sdist(std::log(0.6), std::log(1.6)), tdist(-0.2, 0.2);
    const double h = 1e-5;
    const std::size_t n = snippets.size();
    int points = 0, attempts = 0;
    double worst = 0.0;
    while (points < 20 && attempts < 1000000) {
        ++attempts;
        std::vector<double> ls(n), t(n);
        for (std::size_t k = 0; k < n; ++k) {
            ls[k] = sdist(rng);
            t[k] = tdist(rng);
        }
        if (min_residual(schedule, snippets, ls, t) <= 1e-3) continue;
        ++points;
        const auto analytic = problem.evaluate(ls, t, true);
        auto value = [&](const std::vector<double>& a, const std::vector<double>& b) {
            return problem.evaluate_reference(a, b, false).value;
        };
        for (std::size_t k = 0; k < n; ++k) {
            auto lp = ls, lm = ls, tp = t, tm = t;
            lp[k] += h;
            lm[k] -= h;
            tp[k] += h;
            tm[k] -= h;
            const double fd_s = (value(lp, t) - value(lm, t)) / (2 * h);
            const double fd_t = (value(ls, tp) - value(ls, tm)) / (2 * h);
            worst = std::max(worst, std::abs(analytic.grad_log_scale[k] - fd_s) / std::max(std::abs(fd_s), 1e-8));
            worst = std::max(worst, std::abs(analytic.grad_shift[k] - fd_t) / std::max(std::abs(fd_t), 1e-8));
        }
    }
    report("gradient_check", points == 20 && worst < 1e-4,
           fmt("%.0f kink-free points, %.0f coordinates each, worst relative error %.3g (< 1e-4)", points,
               2.0 * static_cast<double>(n), worst));
}

// ---- brute force ----

// Objective of the 2-snippet, 1-frame instance written out directly.
struct TwoSnippetObjective {
    double a[4], b[4];
    CoalignConfig config;

    double operator()(double sa, double ta, double sb, double tb) const {
        double pa[4], pb[4], m[4], mr[4], ra[4], rb[4];
        double mu = 0.0, nu = 0.0;
        for (int p = 0; p < 4; ++p) {
            pa[p] = sa * a[p] + ta;
            pb[p] = sb * b[p] + tb;
            ra[p] = 1.0 / std::max(pa[p], config.eps_inv);
            rb[p] = 1.0 / std::max(pb[p], config.eps_inv);
            m[p] = 0.5 * (pa[p] + pb[p]);
            mr[p] = 0.5 * (ra[p] + rb[p]);
            mu += std::abs(m[p]) / 4.0;
            nu += std::abs(mr[p]) / 4.0;
        }
        double inv = 0.0, dep = 0.0;
        for (int p = 0; p < 4; ++p) {
            inv += std::abs(pa[p] - m[p]) + std::abs(pb[p] - m[p]);
            dep += std::abs(ra[p] - mr[p]) + std::abs(rb[p] - mr[p]);
        }
        double total = inv / 4.0 / mu + dep / 4.0 / nu;
        for (double s : {sa, sb}) {
            const double under = std::max(0.0, 1.0 - s);
            total += config.lambda1 * under * under;
        }
        total += config.lambda2 * (ta * ta + tb * tb);
        return total;
    }
};

void brute_force() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> dist(0.5, 2.0), jitter(-0.05, 0.05);
    std::vector<float> va(4), vb(4);
    for (int p = 0; p < 4; ++p) {
        va[static_cast<std::size_t>(p)] = static_cast<float>(dist(rng));
        vb[static_cast<std::size_t>(p)] = static_cast<float>(0.7 * va[static_cast<std::size_t>(p)] + 0.2 + jitter(rng));
    }
    const SnippetSchedule schedule(1, 1, {SnippetSpec{0, 1, 1, {0}}, SnippetSpec{1, 1, 1, {0}}});
    const std::vector<DepthSnippet> snippets{DepthSnippet(0, 1, {0}, 2, 2, va),
                                             DepthSnippet(1, 1, {0}, 2, 2, vb)};
    CoalignConfig config;
    TwoSnippetObjective f;
    for (int p = 0; p < 4; ++p) {
        f.a[p] = va[static_cast<std::size_t>(p)];
        f.b[p] = vb[static_cast<std::size_t>(p)];
    }
    f.config = config;

    // The direct formula must agree with the library before it can serve as the oracle.
    const std::vector<AffineParams> probe{{1.3, 0.05}, {0.8, -0.1}};
    const double agree = std::abs(f(1.3, 0.05, 0.8, -0.1) - objective(schedule, snippets, probe, config));

    // Exhaustive coarse grid over the box, then an exhaustive 1e-3 grid around the coarse optimum.
    const double s_lo = 0.1, s_hi = 3.0, t_lo = -1.0, t_hi = 1.0, coarse = 0.025, fine = 1e-3;
    const int ns = static_cast<int>(std::lround((s_hi - s_lo) / coarse)) + 1;
    const int nt = static_cast<int>(std::lround((t_hi - t_lo) / coarse)) + 1;
    double best = 1e300, bsa = 1, bta = 0, bsb = 1, btb = 0;
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j)
            for (int k = 0; k < ns; ++k)
                for (int l = 0; l < nt; ++l) {
                    const double sa = s_lo + i * coarse, ta = t_lo + j * coarse;
                    const double sb = s_lo + k * coarse, tb = t_lo + l * coarse;
                    const double v = f(sa, ta, sb, tb);
                    if (v < best) {
                        best = v;
                        bsa = sa, bta = ta, bsb = sb, btb = tb;
                    }
                }
    const int r = static_cast<int>(std::lround(coarse / fine));
    const double csa = bsa, cta = bta, csb = bsb, ctb = btb;
    for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j)
            for (int k = -r; k <= r; ++k)
                for (int l = -r; l <= r; ++l) {
                    const double v = f(csa + i * fine, cta + j * fine, csb + k * fine, ctb + l * fine);
                    best = std::min(best, v);
                }

    const auto solution = solve(schedule, snippets, config);
    const double gap = std::abs(solution.final_objective - best);
    report("brute_force", gap <= 1e-3 && agree < 1e-12,
           fmt("solve %.6f vs grid %.6f, |diff| %.2g (<= 1e-3), oracle/library %.1g", solution.final_objective,
               best, gap, agree));
}

// ---- metric unit suite ----

DepthVideo video(std::vector<float> v, int frames, int h, int w, SpaceTag tag = SpaceTag::depth) {
    return DepthVideo(frames, h, w, std::move(v), tag);
}

void metric_suite() {
    std::vector<std::string> failed;
    int checks = 0;
    auto expect = [&](bool ok, const std::string& what) {
        ++checks;
        if (!ok) failed.push_back(what);
    };
    // Dyadic depths keep every product exact in float.
    const std::vector<float> gt_v{1.0f, 2.0f, 4.0f, 0.5f, 8.0f, 0.25f, 16.0f, 2.0f};
    auto scaled = [&](float factor) {
        std::vector<float> v;
        for (float g : gt_v) v.push_back(g * factor);
        return v;
    };
    const auto gt = video(gt_v, 2, 2, 2);
    expect(abs_rel(gt, gt) == 0.0, "abs_rel(pred==gt) == 0");
    expect(abs_rel(video(scaled(2.0f), 2, 2, 2), gt) == 1.0, "abs_rel(2 gt) == 1");
    auto half = gt_v;
    for (std::size_t i = 0; i < half.size(); i += 2) half[i] *= 1.5f;
    expect(abs_rel(video(half, 2, 2, 2), gt) == 0.25, "abs_rel(half at 1.5 gt) == 0.25");

    expect(delta1(gt, gt) == 1.0, "delta1(pred==gt) == 1");
    expect(delta1(video(scaled(1.25f), 2, 2, 2), gt) == 0.0, "delta1(1.25 gt) == 0");
    expect(delta1(video(scaled(1.2f), 2, 2, 2), gt) == 1.0, "delta1(1.2 gt) == 1");

    std::vector<float> pred_inv{0.5f, 1.0f, 1.5f, 2.0f, 2.5f, 3.0f}, gt_inv;
    for (float p : pred_inv) gt_inv.push_back(2.0f * p + 3.0f);
    const auto fit = ls_align(video(pred_inv, 1, 2, 3, SpaceTag::inverse_depth),
                              video(gt_inv, 1, 2, 3, SpaceTag::inverse_depth));
    expect(std::abs(fit.scale - 2.0) < 1e-9 && std::abs(fit.shift - 3.0) < 1e-9, "ls_align (2, 3)");
    const auto same = ls_align(video(pred_inv, 1, 2, 3, SpaceTag::inverse_depth),
                               video(pred_inv, 1, 2, 3, SpaceTag::inverse_depth));
    expect(std::abs(same.scale - 1.0) < 1e-12 && std::abs(same.shift) < 1e-12, "ls_align identity");
    bool singular = false;
    try {
        ls_align(video(std::vector<float>(6, 0.7f), 1, 2, 3, SpaceTag::inverse_depth),
                 video(gt_inv, 1, 2, 3, SpaceTag::inverse_depth));
    } catch (const SingularFit&) {
        singular = true;
    }
    expect(singular, "ls_align constant prediction -> SingularFit");

    const auto constant = video(std::vector<float>(3 * 2 * 2, 2.5f), 3, 2, 2);
    expect(opw(constant, FlowField::zeros(2, 2, 2)).raw == 0.0, "opw constant video, zero flow");
    // Static frames [[1,1],[3,3]]: a horizontal shift of one pixel maps onto equal values.
    const auto static_video = video({1, 1, 3, 3, 1, 1, 3, 3}, 2, 2, 2);
    const FlowField shift_right(1, 2, 2, {1, 0, 1, 0, 0, 0, 0, 0});
    expect(opw(static_video, shift_right).raw == 0.0, "opw static video, integer flow");
    const auto swap = video({1, 2, 2, 1}, 2, 1, 2);
    expect(opw(swap, FlowField(1, 1, 2, {1, -1, 0, 0})).raw == 0.0, "opw swap flow");
    expect(std::abs(opw(swap, FlowField::zeros(1, 1, 2)).raw - 2.0 / 3.0) < 1e-15, "opw identity flow by hand");

    bool empty = false;
    try {
        const PixelMask none(gt_v.size(), 0);
        abs_rel(gt, gt, &none);
    } catch (const EmptyMask&) {
        empty = true;
    }
    expect(empty, "abs_rel empty mask -> EmptyMask");

    std::string detail = failed.empty() ? std::to_string(checks) + " evalkit examples exact" : "failed:";
    for (const auto& f : failed) detail += " [" + f + "]";
    report("metric_unit_suite", failed.empty(), detail);
}

// ---- refinement ----

double mean_abs_laplacian(const DepthVideo& v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int f = 0; f < v.frames(); ++f)
        for (int y = 1; y + 1 < v.height(); ++y)
            for (int x = 1; x + 1 < v.width(); ++x) {
                sum += std::abs(v.at(f, y - 1, x) + v.at(f, y + 1, x) + v.at(f, y, x - 1) + v.at(f, y, x + 1) -
                                4.0 * v.at(f, y, x));
                ++n;
            }
    return sum / static_cast<double>(n);
}

void refinement() {
    SceneSpec spec;
    spec.kind = SceneKind::orbiting_sphere_field;
    spec.frames = 12;
    spec.height = 32;
    spec.width = 48;
    spec.seed = 3;
    const auto gt = generate(spec).inverse_depth;
    std::vector<float> values(gt.values().begin(), gt.values().end());
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> pixel(0, gt.frame_size() - 1);
    for (int i = 0; i < 80; ++i) values[5 * gt.frame_size() + pixel(rng)] = (i % 2 == 0) ? 0.05f : 3.0f;
    const DepthVideo fixture(gt.frames(), gt.height(), gt.width(), values);

    RefineConfig silent;
    silent.noise_scale_schedule.assign(10, 0.0);
    const auto same = refine(fixture, silent, IdentityHook{});
    const bool exact = std::equal(same.values().begin(), same.values().end(), fixture.values().begin(),
                                  fixture.values().end(),
                                  [](float a, float b) { return std::memcmp(&a, &b, sizeof a) == 0; });

    RefineConfig noisy;
    noisy.noise_seed = 5;
    noisy.noise_amplitude = 0.02;
    const double before = mean_abs_laplacian(fixture);
    const double after = mean_abs_laplacian(refine(fixture, noisy, GaussianSmoothHook{}));
    report("refinement", exact && after < before,
           std::string("identity+zero noise ") + (exact ? "bit-exact" : "differs") +
               fmt("; gaussian_smooth mean|Laplacian| %.5f -> %.5f", before, after));
}

// ---- CLI-driven criteria ----

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

void tool(const std::string& args, const fs::path& log) {
    const std::string cmd = "'" + std::string(ROLLALIGN_TOOL) + "' " + args + " >>" + q(log) + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw std::runtime_error("command failed (" + std::to_string(WEXITSTATUS(status)) + "): " + args);
}

// synth -> align -> refine at one thread count; returns the bytes of every NPY output.
std::vector<std::string> pipeline_bytes(const fs::path& dir, int threads) {
    fs::create_directories(dir);
    const auto log = dir / "log.txt";
    const std::string th = " --threads " + std::to_string(threads);
    io::write_json(dir / "corrupt.json", {{"scale_range", {0.5, 2.0}},
                                          {"shift_range", {-0.2, 0.2}},
                                          {"noise_sigma", 0.01},
                                          {"drift", 0.02}});
    tool("synth --scene orbiting_sphere_field --frames 40 --height 24 --width 32 --seed 42 --corrupt " +
             q(dir / "corrupt.json") + " --out " + q(dir / "scene") + th,
         log);
    tool("align --snippets " + q(dir / "scene" / "snippets") + " --schedule " + q(dir / "scene" / "schedule.json") +
             " --out " + q(dir / "merged.npy") + " --solution " + q(dir / "solution.json") + th,
         log);
    tool("refine --in " + q(dir / "merged.npy") + " --hook gaussian_smooth --seed 9 --out " +
             q(dir / "refined.npy") + th,
         log);
    std::vector<fs::path> files{dir / "scene" / "gt.npy", dir / "scene" / "flow.npy",
                                dir / "scene" / "flow_mask.npy", dir / "merged.npy", dir / "refined.npy"};
    std::vector<fs::path> snippet_files;
    for (const auto& entry : fs::directory_iterator(dir / "scene" / "snippets"))
        if (entry.path().extension() == ".npy") snippet_files.push_back(entry.path());
    std::sort(snippet_files.begin(), snippet_files.end());
    files.insert(files.end(), snippet_files.begin(), snippet_files.end());
    std::vector<std::string> bytes;
    for (const auto& f : files) bytes.push_back(slurp(f));
    return bytes;
}

void determinism(const fs::path& work) {
    const auto a = pipeline_bytes(work / "det_a", 8);
    const auto b = pipeline_bytes(work / "det_b", 8);
    const auto c = pipeline_bytes(work / "det_c", 1);
    report("determinism", a == b && a == c,
           std::to_string(a.size()) + " NPY files; rerun " + (a == b ? "identical" : "DIFFERS") +
               ", --threads 1 vs 8 " + (a == c ? "identical" : "DIFFERS"));
}

void file_protocol(const fs::path& work) {
    const fs::path dir = work / "protocol";
    fs::create_directories(dir);
    const auto log = dir / "log.txt";
    io::write_json(dir / "corrupt.json",
                   {{"scale_range", {0.5, 2.0}}, {"shift_range", {-0.2, 0.2}}, {"noise_sigma", 0.01}});
    tool("synth --scene depth_range_jump --frames 60 --height 32 --width 48 --seed 8 --corrupt " +
             q(dir / "corrupt.json") + " --out " + q(dir / "scene"),
         log);
    tool("align --snippets " + q(dir / "scene" / "snippets") + " --schedule " + q(dir / "scene" / "schedule.json") +
             " --out " + q(dir / "merged.npy") + " --solution " + q(dir / "solution.json"),
         log);
    tool("eval --pred " + q(dir / "merged.npy") + " --gt " + q(dir / "scene" / "gt.npy") + " --flow " +
             q(dir / "scene" / "flow.npy") + " --flow-mask " + q(dir / "scene" / "flow_mask.npy") + " --out " +
             q(dir / "metrics.json"),
         log);
    const auto cli = io::read_json(dir / "metrics.json");

    SceneSpec scene;
    scene.kind = SceneKind::depth_range_jump;
    scene.frames = 60;
    scene.height = 32;
    scene.width = 48;
    scene.seed = 8;
    const auto generated = generate(scene);
    const int dil[] = {1, 10, 25};
    const auto schedule = build_schedule(60, 3, dil, 1);
    CorruptionSpec corruption;
    corruption.scale_lo = 0.5;
    corruption.scale_hi = 2.0;
    corruption.shift_lo = -0.2;
    corruption.shift_hi = 0.2;
    corruption.noise_sigma = 0.01;
    corruption.seed = 8;
    const auto corrupted = corrupt(generated.inverse_depth, schedule, corruption);
    const auto solution = solve(schedule, corrupted.snippets, CoalignConfig{});
    const auto mem = evaluate(merge(schedule, corrupted.snippets, solution.params),
                              invert(generated.inverse_depth), &generated.flow);

    const double d_abs = std::abs(cli["abs_rel"].get<double>() - mem.abs_rel);
    const double d_d1 = std::abs(cli["delta1"].get<double>() - mem.delta1);
    const double d_opw = std::abs(cli["opw"].get<double>() - mem.opw->raw);
    const double worst = std::max({d_abs, d_d1, d_opw});
    report("file_protocol", worst <= 1e-7,
           fmt("|CLI - in-memory|: abs_rel %.2g, delta1 %.2g, opw %.2g (<= 1e-7)", d_abs, d_d1, d_opw));
}

}  // namespace

int main() {
    const fs::path work = fs::temp_directory_path() / ("rollalign_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);

    OracleRun noisy;
    bool have_noisy = false;
    criterion("oracle_noise_free", [&] {
        const auto noise_free = oracle_run(0.0);
        const auto& m = noise_free.solved;
        report("oracle_noise_free", m.abs_rel < 1e-3 && m.delta1 == 1.0 && noise_free.solve_seconds < 60.0,
               fmt("AbsRel %.4f%% (< 0.1%%), delta1 %.6f (== 1), solve %.1f s single-threaded (< 60 s)",
                   100.0 * m.abs_rel, m.delta1, noise_free.solve_seconds));
    });
    criterion("oracle_noisy", [&] {
        noisy = oracle_run(0.01);
        have_noisy = true;
        const auto& m = noisy.solved;
        report("oracle_noisy", m.abs_rel < 0.02 && m.delta1 > 0.99,
               fmt("AbsRel %.3f%% (< 2%%), delta1 %.5f (> 0.99)", 100.0 * m.abs_rel, m.delta1));
    });
    criterion("ablation_dilations", [&] {
        const double one = ablation_abs_rel({1});
        const double two = ablation_abs_rel({1, 25});
        const double three = ablation_abs_rel({1, 10, 25});
        const double gap1 = one - two, gap2 = two - three;
        report("ablation_dilations", one > two && two >= three && gap1 >= 2.0 * gap2,
               fmt("AbsRel {1} %.4f > {1,25} %.4f >= {1,10,25} %.4f", one, two, three) +
                   fmt("; gaps %.4f >= 2 x %.4f", gap1, gap2));
    });
    criterion("ablation_no_solve", [&] {
        if (!have_noisy) throw std::runtime_error("noisy oracle run unavailable");
        const double ratio = noisy.unaligned.abs_rel / noisy.solved.abs_rel;
        report("ablation_no_solve", ratio >= 5.0,
               fmt("AbsRel identity merge %.4f vs solve %.4f, ratio %.1f (>= 5)", noisy.unaligned.abs_rel,
                   noisy.solved.abs_rel, ratio));
    });
    criterion("gradient_check", gradient_check);
    criterion("brute_force", brute_force);
    criterion("metric_unit_suite", metric_suite);
    criterion("refinement", refinement);
    criterion("determinism", [&] { determinism(work); });
    criterion("file_protocol", [&] { file_protocol(work); });

    fs::remove_all(work);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
