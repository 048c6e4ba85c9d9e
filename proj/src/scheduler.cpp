#include "rollalign/scheduler.hpp"

#include <algorithm>
#include <string>

namespace rollalign {

SnippetSchedule::SnippetSchedule(int frames, int snippet_length,
                                 std::vector<SnippetSpec> snippets,
                                 std::vector<int> skipped_dilations)
    : frames_(frames),
      snippet_length_(snippet_length),
      snippets_(std::move(snippets)),
      skipped_(std::move(skipped_dilations)),
      coverage_(static_cast<std::size_t>(std::max(frames, 0))) {
    if (frames_ < 1) throw InvalidSchedule("schedule needs at least one frame");
    if (snippets_.empty()) throw InvalidSchedule("schedule holds no snippets");
    for (std::size_t k = 0; k < snippets_.size(); ++k) {
        const auto& spec = snippets_[k];
        if (spec.snippet_id != static_cast<int>(k))
            throw InvalidSchedule("snippet ids must be dense 0..N_T-1");
        if (spec.frame_indices.empty()) throw InvalidSchedule("empty snippet");
        for (std::size_t m = 0; m < spec.frame_indices.size(); ++m) {
            const int f = spec.frame_indices[m];
            if (f < 0 || f >= frames_) throw InvalidSchedule("snippet frame index out of range");
            if (m > 0 && f - spec.frame_indices[m - 1] != spec.dilation)
                throw InvalidSchedule("snippet frames must be spaced by the dilation");
            coverage_[static_cast<std::size_t>(f)].push_back(
                CoverageSlot{spec.snippet_id, static_cast<int>(m)});
        }
    }
}

std::span<const CoverageSlot> SnippetSchedule::coverage(int frame) const {
    if (frame < 0 || frame >= frames_) throw InvalidArgument("frame index out of range");
    return coverage_[static_cast<std::size_t>(frame)];
}

std::vector<int> SnippetSchedule::uncovered_frames() const {
    std::vector<int> out;
    for (int i = 0; i < frames_; ++i)
        if (coverage_[static_cast<std::size_t>(i)].empty()) out.push_back(i);
    return out;
}

void SnippetSchedule::require_full_coverage() const {
    const auto missing = uncovered_frames();
    if (!missing.empty())
        throw InvalidSchedule(std::to_string(missing.size()) +
                              " frame(s) are not covered by any snippet, first is " +
                              std::to_string(missing.front()));
}

SnippetSchedule build_schedule(int frames, int snippet_length, std::span<const int> dilations,
                               int stride) {
    if (frames < 1) throw InvalidSchedule("N_F must be >= 1");
    if (snippet_length < 1) throw InvalidSchedule("snippet length must be >= 1");
    if (stride < 1) throw InvalidSchedule("stride must be >= 1");
    if (dilations.empty()) throw InvalidSchedule("at least one dilation is required");

    std::vector<SnippetSpec> snippets;
    std::vector<int> skipped;
    std::vector<int> seen;
    const int last = frames - 1;

    auto emit = [&](int anchor, int g) {
        SnippetSpec spec;
        spec.snippet_id = static_cast<int>(snippets.size());
        spec.dilation = g;
        spec.stride = stride;
        spec.frame_indices.reserve(static_cast<std::size_t>(snippet_length));
        for (int m = 0; m < snippet_length; ++m) spec.frame_indices.push_back(anchor + m * g);
        snippets.push_back(std::move(spec));
    };

    for (int g : dilations) {
        if (g < 1) throw InvalidSchedule("dilation must be >= 1");
        if (std::find(seen.begin(), seen.end(), g) != seen.end()) continue;
        seen.push_back(g);

        const long long span = static_cast<long long>(snippet_length - 1) * g;
        if (span > last) {
            skipped.push_back(g);
            continue;
        }
        int anchor = 0;
        int last_end = -1;
        for (; anchor + span <= last; anchor += stride) {
            emit(anchor, g);
            last_end = anchor + static_cast<int>(span);
        }
        if (last_end != last) emit(last - static_cast<int>(span), g);
    }

    if (snippets.empty())
        throw InvalidSchedule("no snippet of length " + std::to_string(snippet_length) +
                              " fits in " + std::to_string(frames) + " frame(s)");
    return SnippetSchedule(frames, snippet_length, std::move(snippets), std::move(skipped));
}

}  // namespace rollalign
