#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "external_hook.hpp"
#include "rollalign/coalign.hpp"
#include "rollalign/errors.hpp"
#include "rollalign/evalkit.hpp"
#include "rollalign/io.hpp"
#include "rollalign/npy.hpp"
#include "rollalign/refine.hpp"
#include "rollalign/scheduler.hpp"
#include "rollalign/synth.hpp"

namespace rollalign::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

struct CommonOptions {
    int threads = 0;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App& cmd, CommonOptions& common) {
    cmd.add_option("--threads", common.threads,
                   "Worker threads (default: $ROLLING_ALIGN_THREADS, else hardware concurrency)")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--seed", common.seed, "Seed for every random draw of the command");
}

void apply_threads(const CommonOptions& common) {
    int threads = common.threads;
    if (threads <= 0) {
        if (const char* env = std::getenv("ROLLING_ALIGN_THREADS")) {
            try {
                threads = std::stoi(env);
            } catch (const std::exception&) {
                throw InvalidArgument(std::string("ROLLING_ALIGN_THREADS is not an integer: ") + env);
            }
            if (threads <= 0)
                throw InvalidArgument("ROLLING_ALIGN_THREADS must be positive");
        }
    }
    if (threads > 0)
        omp_set_num_threads(threads);
}

void warn_skipped(const SnippetSchedule& schedule) {
    for (int g : schedule.skipped_dilations())
        std::cerr << "warning: dilation " << g << " does not fit " << schedule.frames()
                  << " frames and was skipped\n";
}

// ---- schedule ----

struct ScheduleArgs {
    int frames = 0;
    int snippet_length = 3;
    std::vector<int> dilations{1, 10, 25};
    int stride = 1;
    std::string out;
};

int cmd_schedule(const ScheduleArgs& args) {
    auto schedule = build_schedule(args.frames, args.snippet_length, args.dilations, args.stride);
    warn_skipped(schedule);
    io::write_json(args.out, io::schedule_to_json(schedule));
    std::cout << "wrote " << schedule.size() << " snippets to " << args.out << "\n";
    return kOk;
}

// ---- synth ----

struct SynthArgs {
    std::string scene = "translating_plane";
    int frames = 0;
    int height = 64;
    int width = 96;
    std::optional<double> velocity_x;
    std::optional<double> velocity_y;
    std::optional<int> event_frame;
    std::string corrupt;
    int snippet_length = 3;
    std::vector<int> dilations{1, 10, 25};
    int stride = 1;
    std::string out;
};

int cmd_synth(const SynthArgs& args, const CommonOptions& common) {
    SceneSpec scene;
    scene.kind = scene_kind_from_string(args.scene);
    scene.frames = args.frames;
    scene.height = args.height;
    scene.width = args.width;
    if (args.velocity_x) scene.velocity_x = *args.velocity_x;
    if (args.velocity_y) scene.velocity_y = *args.velocity_y;
    if (args.event_frame) scene.event_frame = *args.event_frame;
    if (common.seed) scene.seed = *common.seed;

    CorruptionSpec corruption;
    if (!args.corrupt.empty()) {
        const json doc = io::read_json(args.corrupt);
        corruption = io::corruption_from_json(doc);
        if (!doc.contains("seed") && common.seed)
            corruption.seed = *common.seed;
    } else if (common.seed) {
        corruption.seed = *common.seed;
    }

    const auto generated = generate(scene);
    auto schedule = build_schedule(args.frames, args.snippet_length, args.dilations, args.stride);
    warn_skipped(schedule);
    const auto corrupted = corrupt(generated.inverse_depth, schedule, corruption);

    const fs::path dir = args.out;
    fs::create_directories(dir);
    io::write_video(dir / "gt.npy", invert(generated.inverse_depth));
    io::write_flow(dir / "flow.npy", dir / "flow_mask.npy", generated.flow);
    io::write_json(dir / "schedule.json", io::schedule_to_json(schedule));

    json extra;
    extra["scene"] = io::scene_to_json(scene);
    extra["corruption"] = io::corruption_to_json(corruption);
    io::write_snippet_directory(dir / "snippets", schedule, corrupted.snippets, extra);

    json hidden = json::array();
    for (std::size_t k = 0; k < corrupted.hidden.size(); ++k)
        hidden.push_back({{"snippet_id", k},
                          {"scale", corrupted.hidden[k].scale},
                          {"shift", corrupted.hidden[k].shift}});
    io::write_json(dir / "hidden_params.json", {{"tool_version", io::kToolVersion},
                                                {"schedule_hash", io::schedule_hash(schedule)},
                                                {"params", hidden}});

    json meta;
    meta["tool_version"] = io::kToolVersion;
    meta["scene"] = io::scene_to_json(scene);
    meta["corruption"] = io::corruption_to_json(corruption);
    meta["gt"] = {{"file", "gt.npy"}, {"space_tag", to_string(SpaceTag::depth)}};
    meta["flow"] = {{"file", "flow.npy"}, {"mask", "flow_mask.npy"}};
    meta["schedule"] = "schedule.json";
    meta["snippets"] = "snippets";
    io::write_json(dir / "synth.json", meta);

    std::cout << "wrote scene '" << args.scene << "' (" << args.frames << " frames, "
              << schedule.size() << " snippets) to " << dir.string() << "\n";
    return kOk;
}

// ---- align ----

struct AlignArgs {
    std::string snippets;
    std::string schedule;
    std::string config;
    std::string out;
    std::string solution;
};

int cmd_align(const AlignArgs& args, const CommonOptions& common) {
    const auto schedule = io::schedule_from_json(io::read_json(args.schedule));
    warn_skipped(schedule);
    CoalignConfig config;
    if (!args.config.empty())
        config = io::coalign_config_from_json(io::read_json(args.config));
    if (common.seed) config.seed = *common.seed;
    config.validate();

    const auto directory = io::read_snippet_directory(args.snippets, schedule);
    const auto solution = solve(schedule, directory.snippets, config);
    const auto merged = merge(schedule, directory.snippets, solution.params);

    io::write_video(args.out, merged);
    json doc = io::solution_to_json(solution, config);
    doc["tool_version"] = io::kToolVersion;
    doc["schedule_hash"] = io::schedule_hash(schedule);
    doc["output"] = {{"file", fs::path(args.out).filename().string()},
                     {"space_tag", to_string(merged.space())}};
    io::write_json(args.solution, doc);

    std::printf("final objective: %.10g\n", solution.final_objective);
    return kOk;
}

// ---- refine ----

struct RefineArgs {
    std::string in;
    std::string hook = "identity";
    std::string config;
    std::string out;
    std::string space = "inverse_depth";
    std::string echo;
};

std::unique_ptr<DenoiserHook> hook_from_name(const std::string& name) {
    const std::string prefix = "exec:";
    if (name.rfind(prefix, 0) == 0)
        return std::make_unique<ExternalProcessHook>(name.substr(prefix.size()));
    return make_hook(name);
}

int cmd_refine(const RefineArgs& args, const CommonOptions& common) {
    RefineConfig config;
    if (!args.config.empty())
        config = io::refine_config_from_json(io::read_json(args.config));
    if (common.seed) config.noise_seed = *common.seed;
    config.validate();

    const auto hook = hook_from_name(args.hook);
    const auto video = io::read_video(args.in, space_tag_from_string(args.space));
    const auto refined = refine(video, config, *hook);
    io::write_video(args.out, refined);

    if (!args.echo.empty()) {
        json doc;
        doc["tool_version"] = io::kToolVersion;
        doc["hook"] = hook->name();
        doc["config"] = io::refine_config_to_json(config);
        io::write_json(args.echo, doc);
    }
    std::cout << "refined " << refined.frames() << " frames with hook '" << hook->name()
              << "'\n";
    return kOk;
}

// ---- eval ----

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string pred_space = "inverse_depth";
    std::string gt_space = "depth";
    std::string flow;
    std::string flow_mask;
    std::string mask;
    std::string sampling = "bilinear";
    std::string out;
};

int cmd_eval(const EvalArgs& args) {
    const auto pred = io::read_video(args.pred, space_tag_from_string(args.pred_space));
    const auto gt = io::read_video(args.gt, space_tag_from_string(args.gt_space));

    std::optional<FlowField> flow;
    if (!args.flow.empty())
        flow = io::read_flow(args.flow, args.flow_mask);
    else if (!args.flow_mask.empty())
        throw InvalidArgument("--flow-mask requires --flow");

    std::optional<PixelMask> mask;
    if (!args.mask.empty()) {
        auto arr = npy::read_u8(args.mask);
        if (arr.shape.size() != 3 || arr.shape[0] != static_cast<std::size_t>(gt.frames()) ||
            arr.shape[1] != static_cast<std::size_t>(gt.height()) ||
            arr.shape[2] != static_cast<std::size_t>(gt.width()))
            throw ProtocolMismatch("mask shape does not match the ground truth video");
        mask = std::move(arr.data);
    }

    EvalOptions options;
    if (args.sampling == "bilinear")
        options.sampling = Sampling::bilinear;
    else if (args.sampling == "nearest")
        options.sampling = Sampling::nearest;
    else
        throw InvalidArgument("unknown sampling mode: " + args.sampling);

    const auto report = evaluate(pred, gt, flow ? &*flow : nullptr, mask ? &*mask : nullptr, options);
    json doc = io::metrics_to_json(report);
    doc["tool_version"] = io::kToolVersion;
    doc["options"] = {{"sampling", args.sampling},
                      {"eps_inv", options.eps_inv},
                      {"pred_space", args.pred_space},
                      {"gt_space", args.gt_space}};
    io::write_json(args.out, doc);

    std::printf("abs_rel: %.8g\ndelta1: %.8g\n", report.abs_rel, report.delta1);
    if (report.opw) std::printf("opw (x1e3): %.8g\n", report.opw->scaled());
    return kOk;
}

int report_error(int code, const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Assemble temporally consistent depth videos from per-snippet predictions"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(io::kToolVersion));

    CommonOptions common;

    ScheduleArgs schedule_args;
    auto* schedule_cmd = app.add_subcommand("schedule", "Build a dilated snippet schedule");
    schedule_cmd->add_option("--frames", schedule_args.frames, "Number of video frames")->required();
    schedule_cmd->add_option("--snippet-len", schedule_args.snippet_length, "Frames per snippet");
    schedule_cmd->add_option("--dilations", schedule_args.dilations, "Dilation rates")
        ->delimiter(',');
    schedule_cmd->add_option("--stride", schedule_args.stride, "Anchor stride");
    schedule_cmd->add_option("--out", schedule_args.out, "Output schedule JSON")->required();
    add_common(*schedule_cmd, common);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene and corrupted snippets");
    synth_cmd->add_option("--scene", synth_args.scene,
                          "translating_plane|orbiting_sphere_field|near_object_intrusion|depth_range_jump");
    synth_cmd->add_option("--frames", synth_args.frames, "Number of frames")->required();
    synth_cmd->add_option("--height", synth_args.height);
    synth_cmd->add_option("--width", synth_args.width);
    synth_cmd->add_option("--velocity-x", synth_args.velocity_x, "Texture motion, pixels per frame");
    synth_cmd->add_option("--velocity-y", synth_args.velocity_y);
    synth_cmd->add_option("--event-frame", synth_args.event_frame);
    synth_cmd->add_option("--corrupt", synth_args.corrupt, "Corruption spec JSON")
        ->check(CLI::ExistingFile);
    synth_cmd->add_option("--snippet-len", synth_args.snippet_length);
    synth_cmd->add_option("--dilations", synth_args.dilations)->delimiter(',');
    synth_cmd->add_option("--stride", synth_args.stride);
    synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();
    add_common(*synth_cmd, common);

    AlignArgs align_args;
    auto* align_cmd = app.add_subcommand("align", "Co-align snippets and merge them into one video");
    align_cmd->add_option("--snippets", align_args.snippets, "Snippet directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    align_cmd->add_option("--schedule", align_args.schedule, "Schedule JSON")
        ->required()
        ->check(CLI::ExistingFile);
    align_cmd->add_option("--config", align_args.config, "Co-alignment config JSON")
        ->check(CLI::ExistingFile);
    align_cmd->add_option("--out", align_args.out, "Merged video NPY")->required();
    align_cmd->add_option("--solution", align_args.solution, "Solution JSON")->required();
    add_common(*align_cmd, common);

    RefineArgs refine_args;
    auto* refine_cmd = app.add_subcommand("refine", "Refine a video with a snippet denoiser hook");
    refine_cmd->add_option("--in", refine_args.in, "Input video NPY")
        ->required()
        ->check(CLI::ExistingFile);
    refine_cmd->add_option("--hook", refine_args.hook,
                           "identity|gaussian_smooth|snippet_mean|exec:<command>");
    refine_cmd->add_option("--config", refine_args.config, "Refinement config JSON")
        ->check(CLI::ExistingFile);
    refine_cmd->add_option("--out", refine_args.out, "Output video NPY")->required();
    refine_cmd->add_option("--space", refine_args.space, "Space tag of the input video");
    refine_cmd->add_option("--echo", refine_args.echo, "Write the resolved config to this JSON");
    add_common(*refine_cmd, common);

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a video against ground truth");
    eval_cmd->add_option("--pred", eval_args.pred, "Predicted video NPY")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--gt", eval_args.gt, "Ground truth NPY")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--pred-space", eval_args.pred_space);
    eval_cmd->add_option("--gt-space", eval_args.gt_space);
    eval_cmd->add_option("--flow", eval_args.flow, "Forward flow NPY")->check(CLI::ExistingFile);
    eval_cmd->add_option("--flow-mask", eval_args.flow_mask, "Flow validity NPY")
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--mask", eval_args.mask, "Evaluation mask NPY")->check(CLI::ExistingFile);
    eval_cmd->add_option("--sampling", eval_args.sampling, "bilinear|nearest");
    eval_cmd->add_option("--out", eval_args.out, "Report JSON")->required();
    add_common(*eval_cmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInvalidInput;
    }

    try {
        apply_threads(common);
        if (*schedule_cmd) return cmd_schedule(schedule_args);
        if (*synth_cmd) return cmd_synth(synth_args, common);
        if (*align_cmd) return cmd_align(align_args, common);
        if (*refine_cmd) return cmd_refine(refine_args, common);
        if (*eval_cmd) return cmd_eval(eval_args);
    } catch (const ProtocolMismatch& e) {
        return report_error(kProtocolMismatch, e);
    } catch (const NonFinite& e) {
        return report_error(kNumericalFailure, e);
    } catch (const DegenerateValue& e) {
        return report_error(kNumericalFailure, e);
    } catch (const SingularFit& e) {
        return report_error(kNumericalFailure, e);
    } catch (const HookFailure& e) {
        return report_error(kNumericalFailure, e);
    } catch (const Error& e) {
        return report_error(kInvalidInput, e);
    } catch (const json::exception& e) {
        return report_error(kInvalidInput, e);
    } catch (const fs::filesystem_error& e) {
        return report_error(kInvalidInput, e);
    }
    return kInvalidInput;
}

}  // namespace rollalign::cli
