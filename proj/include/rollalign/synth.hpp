#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "rollalign/core.hpp"
#include "rollalign/evalkit.hpp"
#include "rollalign/scheduler.hpp"

namespace rollalign {

enum class SceneKind { translating_plane, orbiting_sphere_field, near_object_intrusion, depth_range_jump };

std::string_view to_string(SceneKind kind);
SceneKind scene_kind_from_string(std::string_view name);

struct SceneSpec {
    SceneKind kind = SceneKind::translating_plane;
    int frames = 60;
    int height = 64;
    int width = 96;
    // Image-plane texture motion in pixels per frame.
    double velocity_x = 1.0;
    double velocity_y = 0.0;
    // Sphere orbits (orbiting_sphere_field).
    double orbit_radius = 8.0;
    double period = 60.0;
    int sphere_count = 4;
    // Frame at which the near object appears or the depth range jumps; -1 selects N_F / 2.
    int event_frame = -1;
    std::uint64_t seed = 0;

    int resolved_event_frame() const { return event_frame >= 0 ? event_frame : frames / 2; }
    void validate() const;
};

// Closed-form inverse depth and motion of a scene, queried at continuous pixel positions.
class SceneModel {
public:
    explicit SceneModel(const SceneSpec& spec);

    const SceneSpec& spec() const noexcept { return spec_; }
    double inverse_depth(int frame, double x, double y) const;
    // Index of the surface seen at (x, y): 0 = background, 1.. = objects.
    int owner(int frame, double x, double y) const;
    // Displacement of the surface point seen at (x, y) from `frame` to `frame + 1`.
    void motion(int frame, double x, double y, double& dx, double& dy) const;
    // Whether depth at `frame + 1` is the same surface transported by the motion.
    bool continuous(int frame) const;

private:
    struct Sphere {
        double cx, cy, phase, radius_px, center_depth, bulge;
    };

    double texture(double u, double v) const;
    void sphere_center(const Sphere& s, int frame, double& cx, double& cy) const;
    void intruder_center(int frame, double& cx, double& cy) const;
    bool intruder_present(int frame) const;
    double object_inverse_depth(int object, int frame, double x, double y) const;

    SceneSpec spec_;
    double phase_[3];
    std::vector<Sphere> spheres_;
};

struct SyntheticScene {
    DepthVideo inverse_depth;
    FlowField flow;
};

// Samples the scene model at pixel centers; flow is exact and masked to co-visible pixels.
SyntheticScene generate(const SceneSpec& spec);

struct CorruptionSpec {
    double scale_lo = 1.0;
    double scale_hi = 1.0;
    double shift_lo = 0.0;
    double shift_hi = 0.0;
    // Per-pixel Gaussian noise, in inverse-depth units.
    double noise_sigma = 0.0;
    // Bound on a per-snippet relative scale change per slot, centered on the middle slot. Each
    // snippet draws its slope uniformly from [-drift, drift]; 0 disables it.
    double drift = 0.0;
    std::uint64_t seed = 0;
    double eps_inv = kDefaultEpsInv;

    void validate() const;
};

struct CorruptedSnippets {
    std::vector<DepthSnippet> snippets;
    // The (s, t) each snippet was corrupted with: snippet = s * gt + t + noise.
    std::vector<AffineParams> hidden;
};

CorruptedSnippets corrupt(const DepthVideo& gt, const SnippetSchedule& schedule,
                          const CorruptionSpec& spec);

}  // namespace rollalign
