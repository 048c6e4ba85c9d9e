#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "rollalign/coalign.hpp"
#include "rollalign/core.hpp"
#include "rollalign/evalkit.hpp"
#include "rollalign/refine.hpp"
#include "rollalign/scheduler.hpp"
#include "rollalign/synth.hpp"

namespace rollalign::io {

inline constexpr const char* kToolVersion = "0.1.0";

using json = nlohmann::json;

// Videos are (N_F, H, W) float32; flow is (N_F-1, 2, H, W) float32 with an optional
// (N_F-1, H, W) uint8 validity mask.
void write_video(const std::filesystem::path& path, const DepthVideo& video);
DepthVideo read_video(const std::filesystem::path& path, SpaceTag tag);
void write_flow(const std::filesystem::path& flow_path, const std::filesystem::path& mask_path,
                const FlowField& flow);
FlowField read_flow(const std::filesystem::path& flow_path,
                    const std::filesystem::path& mask_path = {});

json schedule_to_json(const SnippetSchedule& schedule);
SnippetSchedule schedule_from_json(const json& doc);
// FNV-1a over the canonical frame/snippet listing, as 16 hex digits.
std::string schedule_hash(const SnippetSchedule& schedule);

json config_to_json(const CoalignConfig& config);
CoalignConfig coalign_config_from_json(const json& doc);
json solution_to_json(const AlignmentSolution& solution, const CoalignConfig& config);

json refine_config_to_json(const RefineConfig& config);
RefineConfig refine_config_from_json(const json& doc);

json scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const json& doc);
json corruption_to_json(const CorruptionSpec& spec);
CorruptionSpec corruption_from_json(const json& doc);

json metrics_to_json(const MetricsReport& report);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& doc);

// A directory holding manifest.json plus one (n, H, W) NPY file per snippet.
struct SnippetDirectory {
    int frames = 0;
    int height = 0;
    int width = 0;
    SpaceTag space = SpaceTag::inverse_depth;
    std::string schedule_hash;
    std::vector<DepthSnippet> snippets;
};

void write_snippet_directory(const std::filesystem::path& dir, const SnippetSchedule& schedule,
                             const std::vector<DepthSnippet>& snippets,
                             const json& extra = json::object());
// Validates every file against the manifest and the schedule; throws ProtocolMismatch.
SnippetDirectory read_snippet_directory(const std::filesystem::path& dir,
                                        const SnippetSchedule& schedule);

}  // namespace rollalign::io
