#include <initializer_list>
#include "rollalign/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "rollalign/npy.hpp"

namespace rollalign::io {

namespace fs = std::filesystem;

void write_video(const fs::path& path, const DepthVideo& video) {
    const std::size_t shape[] = {static_cast<std::size_t>(video.frames()),
                                 static_cast<std::size_t>(video.height()),
                                 static_cast<std::size_t>(video.width())};
    npy::write(path, video.values(), shape);
}

DepthVideo read_video(const fs::path& path, SpaceTag tag) {
    auto arr = npy::read_f32(path);
    if (arr.shape.size() != 3)
        throw ProtocolMismatch("'" + path.string() + "' must hold an (N_F, H, W) array");
    return DepthVideo(static_cast<int>(arr.shape[0]), static_cast<int>(arr.shape[1]),
                      static_cast<int>(arr.shape[2]), std::move(arr.data), tag);
}

void write_flow(const fs::path& flow_path, const fs::path& mask_path, const FlowField& flow) {
    const auto pairs = static_cast<std::size_t>(flow.pairs());
    const auto h = static_cast<std::size_t>(flow.height());
    const auto w = static_cast<std::size_t>(flow.width());
    const std::size_t shape[] = {pairs, 2, h, w};
    npy::write(flow_path, flow.displacement(), shape);
    if (!mask_path.empty()) {
        std::vector<std::uint8_t> mask(flow.valid().begin(), flow.valid().end());
        if (mask.empty()) mask.assign(pairs * h * w, 1);
        const std::size_t mask_shape[] = {pairs, h, w};
        npy::write(mask_path, std::span<const std::uint8_t>(mask), mask_shape);
    }
}

FlowField read_flow(const fs::path& flow_path, const fs::path& mask_path) {
    auto arr = npy::read_f32(flow_path);
    if (arr.shape.size() != 4 || arr.shape[1] != 2)
        throw ProtocolMismatch("'" + flow_path.string() + "' must hold an (N_F-1, 2, H, W) array");
    std::vector<std::uint8_t> valid;
    if (!mask_path.empty()) {
        auto mask = npy::read_u8(mask_path);
        if (mask.shape != std::vector<std::size_t>{arr.shape[0], arr.shape[2], arr.shape[3]})
            throw ProtocolMismatch("flow mask shape does not match the flow");
        valid = std::move(mask.data);
    }
    return FlowField(static_cast<int>(arr.shape[0]), static_cast<int>(arr.shape[2]),
                     static_cast<int>(arr.shape[3]), std::move(arr.data), std::move(valid));
}

json schedule_to_json(const SnippetSchedule& schedule) {
    json snippets = json::array();
    std::vector<int> dilations;
    for (const auto& s : schedule.snippets()) {
        snippets.push_back({{"snippet_id", s.snippet_id},
                            {"dilation", s.dilation},
                            {"stride", s.stride},
                            {"frame_indices", s.frame_indices}});
        if (std::find(dilations.begin(), dilations.end(), s.dilation) == dilations.end())
            dilations.push_back(s.dilation);
    }
    json coverage = json::array();
    for (int i = 0; i < schedule.frames(); ++i) {
        json slots = json::array();
        for (const auto& slot : schedule.coverage(i)) slots.push_back({slot.snippet_id, slot.slot});
        coverage.push_back(std::move(slots));
    }
    return {{"format", "rollalign.schedule"},
            {"tool_version", kToolVersion},
            {"frames", schedule.frames()},
            {"snippet_length", schedule.snippet_length()},
            {"dilations", dilations},
            {"skipped_dilations", schedule.skipped_dilations()},
            {"snippet_count", schedule.size()},
            {"hash", schedule_hash(schedule)},
            {"snippets", std::move(snippets)},
            {"coverage", std::move(coverage)}};
}

SnippetSchedule schedule_from_json(const json& doc) {
    try {
        std::vector<SnippetSpec> specs;
        for (const auto& s : doc.at("snippets")) {
            SnippetSpec spec;
            spec.snippet_id = s.at("snippet_id").get<int>();
            spec.dilation = s.at("dilation").get<int>();
            spec.stride = s.value("stride", 1);
            spec.frame_indices = s.at("frame_indices").get<std::vector<int>>();
            specs.push_back(std::move(spec));
        }
        SnippetSchedule schedule(doc.at("frames").get<int>(), doc.at("snippet_length").get<int>(),
                                 std::move(specs),
                                 doc.value("skipped_dilations", std::vector<int>{}));
        if (doc.contains("hash") && doc.at("hash").get<std::string>() != schedule_hash(schedule))
            throw ProtocolMismatch("schedule hash does not match its snippet listing");
        return schedule;
    } catch (const json::exception& e) {
        throw ProtocolMismatch(std::string("malformed schedule JSON: ") + e.what());
    }
}

std::string schedule_hash(const SnippetSchedule& schedule) {
    std::string canonical = std::to_string(schedule.frames()) + ";" +
                            std::to_string(schedule.snippet_length()) + ";";
    for (const auto& s : schedule.snippets()) {
        canonical += std::to_string(s.snippet_id) + ":" + std::to_string(s.dilation) + ":";
        for (int f : s.frame_indices) canonical += std::to_string(f) + ",";
        canonical += ";";
    }
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

json config_to_json(const CoalignConfig& config) {
    json weights = json::object();
    for (const auto& [g, w] : config.dilation_weights) weights[std::to_string(g)] = w;
    return {{"lambda1", config.lambda1},
            {"lambda2", config.lambda2},
            {"steps", config.steps},
            {"learning_rate", config.learning_rate},
            {"final_learning_rate", config.final_learning_rate},
            {"dilation_weights", weights},
            {"shift_penalty_form", std::string(to_string(config.shift_penalty))},
            {"seed", config.seed},
            {"use_depth_space_term", config.use_depth_space_term},
            {"pixel_stride", config.pixel_stride},
            {"eps_inv", config.eps_inv}};
}

namespace {

void reject_unknown_keys(const json& doc, std::initializer_list<const char*> known, const char* what) {
    if (!doc.is_object()) throw InvalidArgument(std::string(what) + " must be a JSON object");
    for (const auto& item : doc.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || item.key() == k;
        if (!ok) throw InvalidArgument(std::string("unknown key in ") + what + ": " + item.key());
    }
}

}  // namespace

CoalignConfig coalign_config_from_json(const json& doc) {
    reject_unknown_keys(doc,
                        {"lambda1", "lambda2", "steps", "learning_rate", "final_learning_rate", "dilation_weights",
                         "shift_penalty_form", "seed", "use_depth_space_term", "pixel_stride", "eps_inv"},
                        "coalign config");
    try {
        CoalignConfig c;
        c.lambda1 = doc.value("lambda1", c.lambda1);
        c.lambda2 = doc.value("lambda2", c.lambda2);
        c.steps = doc.value("steps", c.steps);
        c.learning_rate = doc.value("learning_rate", c.learning_rate);
        c.final_learning_rate = doc.value("final_learning_rate", c.final_learning_rate);
        if (doc.contains("dilation_weights"))
            for (const auto& [key, value] : doc.at("dilation_weights").items())
                c.dilation_weights[std::stoi(key)] = value.get<double>();
        if (doc.contains("shift_penalty_form"))
            c.shift_penalty = shift_penalty_from_string(doc.at("shift_penalty_form").get<std::string>());
        c.seed = doc.value("seed", c.seed);
        c.use_depth_space_term = doc.value("use_depth_space_term", c.use_depth_space_term);
        c.pixel_stride = doc.value("pixel_stride", c.pixel_stride);
        c.eps_inv = doc.value("eps_inv", c.eps_inv);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed coalign config: ") + e.what());
    }
}

json solution_to_json(const AlignmentSolution& solution, const CoalignConfig& config) {
    json params = json::array();
    for (std::size_t k = 0; k < solution.params.size(); ++k)
        params.push_back({{"snippet_id", k},
                          {"scale", solution.params[k].scale},
                          {"shift", solution.params[k].shift}});
    return {{"format", "rollalign.solution"},
            {"tool_version", kToolVersion},
            {"params", std::move(params)},
            {"final_objective", solution.final_objective},
            {"initial_objective", solution.objective_trace.front()},
            {"best_step", solution.best_step},
            {"clamped_reciprocals", solution.clamped_reciprocals},
            {"learning_rate", solution.learning_rate},
            {"final_learning_rate", solution.final_learning_rate},
            {"config", config_to_json(config)}};
}

json refine_config_to_json(const RefineConfig& config) {
    return {{"start_fraction", config.start_fraction},
            {"num_steps", config.num_steps},
            {"dilation_schedule", config.dilation_schedule},
            {"noise_seed", config.noise_seed},
            {"noise_scale_schedule", config.resolved_noise_schedule()},
            {"noise_amplitude", config.noise_amplitude},
            {"snippet_length", config.snippet_length}};
}

RefineConfig refine_config_from_json(const json& doc) {
    reject_unknown_keys(doc,
                        {"start_fraction", "num_steps", "dilation_schedule", "noise_seed", "noise_scale_schedule",
                         "noise_amplitude", "snippet_length"},
                        "refine config");
    try {
        RefineConfig c;
        c.start_fraction = doc.value("start_fraction", c.start_fraction);
        c.num_steps = doc.value("num_steps", c.num_steps);
        c.dilation_schedule = doc.value("dilation_schedule", c.dilation_schedule);
        c.noise_seed = doc.value("noise_seed", c.noise_seed);
        c.noise_scale_schedule = doc.value("noise_scale_schedule", c.noise_scale_schedule);
        c.noise_amplitude = doc.value("noise_amplitude", c.noise_amplitude);
        c.snippet_length = doc.value("snippet_length", c.snippet_length);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed refine config: ") + e.what());
    }
}

json scene_to_json(const SceneSpec& spec) {
    return {{"kind", std::string(to_string(spec.kind))},
            {"frames", spec.frames},
            {"height", spec.height},
            {"width", spec.width},
            {"velocity_x", spec.velocity_x},
            {"velocity_y", spec.velocity_y},
            {"orbit_radius", spec.orbit_radius},
            {"period", spec.period},
            {"sphere_count", spec.sphere_count},
            {"event_frame", spec.resolved_event_frame()},
            {"seed", spec.seed}};
}

SceneSpec scene_from_json(const json& doc) {
    try {
        SceneSpec s;
        if (doc.contains("kind")) s.kind = scene_kind_from_string(doc.at("kind").get<std::string>());
        s.frames = doc.value("frames", s.frames);
        s.height = doc.value("height", s.height);
        s.width = doc.value("width", s.width);
        s.velocity_x = doc.value("velocity_x", s.velocity_x);
        s.velocity_y = doc.value("velocity_y", s.velocity_y);
        s.orbit_radius = doc.value("orbit_radius", s.orbit_radius);
        s.period = doc.value("period", s.period);
        s.sphere_count = doc.value("sphere_count", s.sphere_count);
        s.event_frame = doc.value("event_frame", s.event_frame);
        s.seed = doc.value("seed", s.seed);
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw InvalidSpec(std::string("malformed scene spec: ") + e.what());
    }
}

json corruption_to_json(const CorruptionSpec& spec) {
    return {{"scale_range", {spec.scale_lo, spec.scale_hi}},
            {"shift_range", {spec.shift_lo, spec.shift_hi}},
            {"noise_sigma", spec.noise_sigma},
            {"drift", spec.drift},
            {"seed", spec.seed},
            {"eps_inv", spec.eps_inv}};
}

CorruptionSpec corruption_from_json(const json& doc) {
    try {
        CorruptionSpec c;
        if (doc.contains("scale_range")) {
            c.scale_lo = doc.at("scale_range").at(0).get<double>();
            c.scale_hi = doc.at("scale_range").at(1).get<double>();
        }
        if (doc.contains("shift_range")) {
            c.shift_lo = doc.at("shift_range").at(0).get<double>();
            c.shift_hi = doc.at("shift_range").at(1).get<double>();
        }
        c.noise_sigma = doc.value("noise_sigma", c.noise_sigma);
        c.drift = doc.value("drift", c.drift);
        c.seed = doc.value("seed", c.seed);
        c.eps_inv = doc.value("eps_inv", c.eps_inv);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw InvalidSpec(std::string("malformed corruption spec: ") + e.what());
    }
}

json metrics_to_json(const MetricsReport& report) {
    json doc = {{"format", "rollalign.metrics"},
                {"tool_version", kToolVersion},
                {"abs_rel", report.abs_rel},
                {"delta1", report.delta1},
                {"scale", report.scale},
                {"shift", report.shift},
                {"valid_pixels", report.valid_pixels},
                {"clamped", report.clamped}};
    if (report.opw) {
        doc["opw"] = report.opw->raw;
        doc["opw_x1e3"] = report.opw->scaled();
        doc["opw_pixels"] = report.opw->count;
    } else {
        doc["opw"] = nullptr;
    }
    return doc;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidArgument("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot open '" + path.string() + "' for writing");
    out << doc.dump(2) << '\n';
}

namespace {

std::string snippet_file_name(int k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "snippet_%05d.npy", k);
    return buf;
}

}  // namespace

void write_snippet_directory(const fs::path& dir, const SnippetSchedule& schedule,
                             const std::vector<DepthSnippet>& snippets, const json& extra) {
    check_consistency(schedule, snippets);
    fs::create_directories(dir);
    json entries = json::array();
    for (const auto& snip : snippets) {
        const auto name = snippet_file_name(snip.snippet_id());
        const std::size_t shape[] = {static_cast<std::size_t>(snip.length()),
                                     static_cast<std::size_t>(snip.height()),
                                     static_cast<std::size_t>(snip.width())};
        npy::write(dir / name, snip.values(), shape);
        entries.push_back({{"snippet_id", snip.snippet_id()},
                           {"file", name},
                           {"dilation", snip.dilation()},
                           {"frame_indices", snip.frame_indices()},
                           {"shape", {snip.length(), snip.height(), snip.width()}}});
    }
    json manifest = {{"format", "rollalign.snippets"},
                     {"tool_version", kToolVersion},
                     {"video",
                      {{"frames", schedule.frames()},
                       {"height", snippets.front().height()},
                       {"width", snippets.front().width()},
                       {"space_tag", "inverse_depth"}}},
                     {"schedule_hash", schedule_hash(schedule)},
                     {"snippets", std::move(entries)}};
    for (const auto& [key, value] : extra.items()) manifest[key] = value;
    write_json(dir / "manifest.json", manifest);
}

SnippetDirectory read_snippet_directory(const fs::path& dir, const SnippetSchedule& schedule) {
    const auto manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path))
        throw ProtocolMismatch("no manifest.json in '" + dir.string() + "'");
    json manifest;
    try {
        manifest = read_json(manifest_path);
    } catch (const InvalidArgument& e) {
        throw ProtocolMismatch(e.what());
    }
    try {
        SnippetDirectory out;
        const auto& video = manifest.at("video");
        out.frames = video.at("frames").get<int>();
        out.height = video.at("height").get<int>();
        out.width = video.at("width").get<int>();
        out.space = space_tag_from_string(video.at("space_tag").get<std::string>());
        out.schedule_hash = manifest.at("schedule_hash").get<std::string>();
        if (out.schedule_hash != schedule_hash(schedule))
            throw ProtocolMismatch("manifest schedule hash does not match the schedule");
        if (out.frames != schedule.frames())
            throw ProtocolMismatch("manifest frame count does not match the schedule");
        if (out.space != SpaceTag::inverse_depth)
            throw ProtocolMismatch("snippets must be in inverse-depth space");

        const auto& entries = manifest.at("snippets");
        if (static_cast<int>(entries.size()) != schedule.size())
            throw ProtocolMismatch("manifest lists a different number of snippets");
        for (const auto& e : entries) {
            const int k = e.at("snippet_id").get<int>();
            if (k != static_cast<int>(out.snippets.size()))
                throw ProtocolMismatch("manifest snippets must be listed in id order");
            const auto& spec = schedule.snippet(k);
            const auto file = dir / e.at("file").get<std::string>();
            if (!fs::exists(file))
                throw ProtocolMismatch("snippet file '" + file.string() + "' is missing");
            auto arr = npy::read_f32(file);
            const std::vector<std::size_t> expected{spec.frame_indices.size(),
                                                    static_cast<std::size_t>(out.height),
                                                    static_cast<std::size_t>(out.width)};
            if (arr.shape != expected)
                throw ProtocolMismatch("snippet file '" + file.string() +
                                       "' does not match the declared shape");
            if (e.at("frame_indices").get<std::vector<int>>() != spec.frame_indices)
                throw ProtocolMismatch("snippet " + std::to_string(k) +
                                       " frame indices disagree with the schedule");
            out.snippets.emplace_back(k, spec.dilation, spec.frame_indices, out.height, out.width,
                                      std::move(arr.data));
        }
        return out;
    } catch (const json::exception& e) {
        throw ProtocolMismatch(std::string("malformed manifest: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ProtocolMismatch(e.what());
    }
}

}  // namespace rollalign::io
