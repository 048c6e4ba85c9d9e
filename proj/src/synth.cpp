#include "rollalign/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace rollalign {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::mt19937_64 engine_for(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

std::string_view to_string(SceneKind kind) {
    switch (kind) {
        case SceneKind::translating_plane: return "translating_plane";
        case SceneKind::orbiting_sphere_field: return "orbiting_sphere_field";
        case SceneKind::near_object_intrusion: return "near_object_intrusion";
        case SceneKind::depth_range_jump: return "depth_range_jump";
    }
    return "translating_plane";
}

SceneKind scene_kind_from_string(std::string_view name) {
    for (auto kind : {SceneKind::translating_plane, SceneKind::orbiting_sphere_field,
                      SceneKind::near_object_intrusion, SceneKind::depth_range_jump})
        if (to_string(kind) == name) return kind;
    throw InvalidSpec("unknown scene kind '" + std::string(name) + "'");
}

void SceneSpec::validate() const {
    if (frames < 1 || height < 2 || width < 2) throw InvalidSpec("scene needs N_F >= 1, H, W >= 2");
    if (!std::isfinite(velocity_x) || !std::isfinite(velocity_y))
        throw InvalidSpec("scene velocity must be finite");
    if (!(period > 0.0)) throw InvalidSpec("orbit period must be > 0");
    if (!(orbit_radius >= 0.0)) throw InvalidSpec("orbit radius must be >= 0");
    if (sphere_count < 0) throw InvalidSpec("sphere count must be >= 0");
    if (event_frame >= frames) throw InvalidSpec("event frame beyond the last frame");
}

SceneModel::SceneModel(const SceneSpec& spec) : spec_(spec) {
    spec_.validate();
    auto rng = engine_for(spec_.seed, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (double& p : phase_) p = kTwoPi * unit(rng);

    if (spec_.kind == SceneKind::orbiting_sphere_field) {
        const double side = std::min(spec_.height, spec_.width);
        for (int k = 0; k < spec_.sphere_count; ++k) {
            Sphere s{};
            s.cx = spec_.width * (0.25 + 0.5 * unit(rng));
            s.cy = spec_.height * (0.25 + 0.5 * unit(rng));
            s.phase = kTwoPi * unit(rng);
            s.radius_px = side * (0.12 + 0.08 * unit(rng));
            s.center_depth = 1.2 + 0.8 * unit(rng);
            s.bulge = 0.3;
            spheres_.push_back(s);
        }
    }
}

// Smooth periodic pattern in [0, 1].
double SceneModel::texture(double u, double v) const {
    const double lu = 0.75 * spec_.width;
    const double lv = 0.9 * spec_.height;
    return 0.5 + 0.25 * std::sin(kTwoPi * u / lu + phase_[0]) +
           0.25 * std::sin(kTwoPi * v / lv + phase_[1]) *
               std::cos(kTwoPi * u / (2.3 * lu) + phase_[2]);
}

void SceneModel::sphere_center(const Sphere& s, int frame, double& cx, double& cy) const {
    const double angle = kTwoPi * frame / spec_.period + s.phase;
    cx = s.cx + spec_.orbit_radius * std::cos(angle);
    cy = s.cy + spec_.orbit_radius * std::sin(angle);
}

bool SceneModel::intruder_present(int frame) const {
    return spec_.kind == SceneKind::near_object_intrusion && frame >= spec_.resolved_event_frame();
}

void SceneModel::intruder_center(int frame, double& cx, double& cy) const {
    const double radius = 0.3 * std::min(spec_.height, spec_.width);
    const double travel = frame - spec_.resolved_event_frame();
    cx = std::min(0.25 * radius + travel, 0.5 * spec_.width);
    cy = 0.5 * spec_.height;
}

double SceneModel::object_inverse_depth(int object, int frame, double x, double y) const {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    double center_depth = 0.0;
    double bulge = 0.0;
    if (spec_.kind == SceneKind::near_object_intrusion) {
        if (!intruder_present(frame)) return 0.0;
        intruder_center(frame, cx, cy);
        radius = 0.3 * std::min(spec_.height, spec_.width);
        center_depth = 0.45;
        bulge = 0.1;
    } else {
        const auto& s = spheres_[static_cast<std::size_t>(object - 1)];
        sphere_center(s, frame, cx, cy);
        radius = s.radius_px;
        center_depth = s.center_depth;
        bulge = s.bulge;
    }
    const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (radius * radius);
    if (r2 >= 1.0) return 0.0;
    return 1.0 / (center_depth - bulge * std::sqrt(1.0 - r2));
}

int SceneModel::owner(int frame, double x, double y) const {
    int best = 0;
    double best_inv = 0.0;
    const int objects = spec_.kind == SceneKind::orbiting_sphere_field ? spec_.sphere_count
                        : spec_.kind == SceneKind::near_object_intrusion ? 1
                                                                         : 0;
    for (int k = 1; k <= objects; ++k) {
        const double inv = object_inverse_depth(k, frame, x, y);
        if (inv > best_inv) {
            best_inv = inv;
            best = k;
        }
    }
    return best;
}

double SceneModel::inverse_depth(int frame, double x, double y) const {
    const int who = owner(frame, x, y);
    if (who > 0) return object_inverse_depth(who, frame, x, y);

    const double u = x - spec_.velocity_x * frame;
    const double v = y - spec_.velocity_y * frame;
    switch (spec_.kind) {
        case SceneKind::translating_plane: return 0.5 + 1.5 * texture(u, v);
        case SceneKind::orbiting_sphere_field: return 0.35 + 0.2 * texture(x, y);
        case SceneKind::near_object_intrusion: return 0.1 + 0.08 * texture(u, v);
        case SceneKind::depth_range_jump:
            return frame < spec_.resolved_event_frame() ? 0.9 + 0.2 * texture(u, v)
                                                        : 0.4 + 1.2 * texture(u, v);
    }
    return 1.0;
}

void SceneModel::motion(int frame, double x, double y, double& dx, double& dy) const {
    const int who = owner(frame, x, y);
    if (who == 0) {
        const bool static_background = spec_.kind == SceneKind::orbiting_sphere_field;
        dx = static_background ? 0.0 : spec_.velocity_x;
        dy = static_background ? 0.0 : spec_.velocity_y;
        return;
    }
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
    if (spec_.kind == SceneKind::near_object_intrusion) {
        intruder_center(frame, x0, y0);
        intruder_center(frame + 1, x1, y1);
    } else {
        const auto& s = spheres_[static_cast<std::size_t>(who - 1)];
        sphere_center(s, frame, x0, y0);
        sphere_center(s, frame + 1, x1, y1);
    }
    dx = x1 - x0;
    dy = y1 - y0;
}

bool SceneModel::continuous(int frame) const {
    return !(spec_.kind == SceneKind::depth_range_jump &&
             frame + 1 == spec_.resolved_event_frame());
}

SyntheticScene generate(const SceneSpec& spec) {
    const SceneModel model(spec);
    const int n_f = spec.frames;
    const int h = spec.height;
    const int w = spec.width;
    const std::size_t frame_size = static_cast<std::size_t>(h) * w;

    std::vector<float> depth(static_cast<std::size_t>(n_f) * frame_size);
    const int pairs = n_f - 1;
    std::vector<float> flow(static_cast<std::size_t>(std::max(pairs, 0)) * 2 * frame_size);
    std::vector<std::uint8_t> valid(static_cast<std::size_t>(std::max(pairs, 0)) * frame_size);

#pragma omp parallel for schedule(static)
    for (int f = 0; f < n_f; ++f) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * w + x;
                depth[static_cast<std::size_t>(f) * frame_size + p] =
                    static_cast<float>(model.inverse_depth(f, x, y));
                if (f == n_f - 1) continue;
                double dx = 0.0;
                double dy = 0.0;
                model.motion(f, x, y, dx, dy);
                flow[(2 * static_cast<std::size_t>(f)) * frame_size + p] = static_cast<float>(dx);
                flow[(2 * static_cast<std::size_t>(f) + 1) * frame_size + p] =
                    static_cast<float>(dy);
                const double tx = x + dx;
                const double ty = y + dy;
                const bool inside = tx >= 0.0 && tx <= w - 1 && ty >= 0.0 && ty <= h - 1;
                valid[static_cast<std::size_t>(f) * frame_size + p] =
                    model.continuous(f) && inside &&
                    model.owner(f + 1, tx, ty) == model.owner(f, x, y);
            }
        }
    }
    return SyntheticScene{DepthVideo(n_f, h, w, std::move(depth), SpaceTag::inverse_depth),
                          FlowField(pairs, h, w, std::move(flow), std::move(valid))};
}

void CorruptionSpec::validate() const {
    if (!(scale_lo > 0.0) || !(scale_lo <= scale_hi))
        throw InvalidSpec("scale range must satisfy 0 < s_lo <= s_hi");
    if (!(shift_lo <= shift_hi)) throw InvalidSpec("shift range must satisfy t_lo <= t_hi");
    if (!(noise_sigma >= 0.0)) throw InvalidSpec("noise sigma must be >= 0");
    if (!(drift >= 0.0) || !std::isfinite(drift)) throw InvalidSpec("drift must be finite and >= 0");
}

CorruptedSnippets corrupt(const DepthVideo& gt, const SnippetSchedule& schedule,
                          const CorruptionSpec& spec) {
    spec.validate();
    if (schedule.frames() != gt.frames())
        throw InvalidSpec("schedule frame count does not match the video");
    if (gt.space() != SpaceTag::inverse_depth)
        throw InvalidSpec("corruption applies to inverse-depth videos");

    // Hidden parameters come from one stream, in snippet order.
    auto rng = engine_for(spec.seed, 0);
    std::uniform_real_distribution<double> scale_dist(spec.scale_lo, spec.scale_hi);
    std::uniform_real_distribution<double> shift_dist(spec.shift_lo, spec.shift_hi);
    const int n_t = schedule.size();
    std::vector<AffineParams> hidden(static_cast<std::size_t>(n_t));
    for (auto& p : hidden) {
        p.scale = spec.scale_lo == spec.scale_hi ? spec.scale_lo : scale_dist(rng);
        p.shift = spec.shift_lo == spec.shift_hi ? spec.shift_lo : shift_dist(rng);
    }

    const std::size_t frame_size = gt.frame_size();
    std::vector<std::vector<float>> values(static_cast<std::size_t>(n_t));
    std::vector<std::uint8_t> violated(static_cast<std::size_t>(n_t), 0);

#pragma omp parallel for schedule(static)
    for (int k = 0; k < n_t; ++k) {
        const auto& spec_k = schedule.snippet(k);
        const auto& prm = hidden[static_cast<std::size_t>(k)];
        auto noise_rng = engine_for(spec.seed, static_cast<std::uint64_t>(k) + 1);
        std::normal_distribution<double> noise(0.0, 1.0);
        const std::size_t n = spec_k.frame_indices.size();
        const double center = 0.5 * static_cast<double>(n - 1);
        // Each snippet gets its own drift slope in [-drift, drift], drawn before any noise.
        double slope = 0.0;
        if (spec.drift != 0.0)
            slope = std::uniform_real_distribution<double>(-spec.drift, spec.drift)(noise_rng);
        auto& out = values[static_cast<std::size_t>(k)];
        out.resize(n * frame_size);
        for (std::size_t m = 0; m < n; ++m) {
            const auto src = gt.frame(spec_k.frame_indices[m]);
            const double drift = 1.0 + slope * (static_cast<double>(m) - center);
            for (std::size_t p = 0; p < frame_size; ++p) {
                double v = prm.apply(drift * src[p]);
                if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise(noise_rng);
                if (!(v > spec.eps_inv)) violated[static_cast<std::size_t>(k)] = 1;
                out[m * frame_size + p] = static_cast<float>(v);
            }
        }
    }

    CorruptedSnippets result;
    result.hidden = std::move(hidden);
    result.snippets.reserve(static_cast<std::size_t>(n_t));
    for (int k = 0; k < n_t; ++k) {
        if (violated[static_cast<std::size_t>(k)])
            throw InvalidSpec("corruption drives snippet " + std::to_string(k) +
                              " to non-positive inverse depth");
        const auto& spec_k = schedule.snippet(k);
        result.snippets.emplace_back(k, spec_k.dilation, spec_k.frame_indices, gt.height(),
                                     gt.width(), std::move(values[static_cast<std::size_t>(k)]));
    }
    return result;
}

}  // namespace rollalign
