#pragma once

#include <span>
#include <vector>

#include "rollalign/errors.hpp"

namespace rollalign {

struct SnippetSpec {
    int snippet_id = 0;
    int dilation = 1;
    int stride = 1;
    std::vector<int> frame_indices;

    bool operator==(const SnippetSpec&) const = default;
};

// One prediction of frame i: which snippet produced it and at which slot.
struct CoverageSlot {
    int snippet_id = 0;
    int slot = 0;

    bool operator==(const CoverageSlot&) const = default;
};

// All snippets of the dilated rolling kernel plus the frame -> (snippet, slot) index.
class SnippetSchedule {
public:
    SnippetSchedule(int frames, int snippet_length, std::vector<SnippetSpec> snippets,
                    std::vector<int> skipped_dilations = {});

    int frames() const noexcept { return frames_; }
    int snippet_length() const noexcept { return snippet_length_; }
    int size() const noexcept { return static_cast<int>(snippets_.size()); }
    const std::vector<SnippetSpec>& snippets() const noexcept { return snippets_; }
    const SnippetSpec& snippet(int id) const { return snippets_.at(static_cast<std::size_t>(id)); }
    std::span<const CoverageSlot> coverage(int frame) const;
    int coverage_count(int frame) const { return static_cast<int>(coverage(frame).size()); }

    // Requested dilations that produced no snippet because they do not fit in N_F frames.
    const std::vector<int>& skipped_dilations() const noexcept { return skipped_; }
    std::vector<int> uncovered_frames() const;
    // Throws InvalidSchedule unless every frame is covered at least once.
    void require_full_coverage() const;

    bool operator==(const SnippetSchedule& other) const {
        return frames_ == other.frames_ && snippet_length_ == other.snippet_length_ &&
               snippets_ == other.snippets_;
    }

private:
    int frames_;
    int snippet_length_;
    std::vector<SnippetSpec> snippets_;
    std::vector<int> skipped_;
    std::vector<std::vector<CoverageSlot>> coverage_;
};

// Snippets {a, a+g, ..., a+(n-1)g} for a = 0, h, 2h, ... per dilation g, plus one trailing
// snippet anchored at N_F-1-(n-1)g whenever the last regular one stops short of the last frame.
SnippetSchedule build_schedule(int frames, int snippet_length, std::span<const int> dilations,
                               int stride = 1);

}  // namespace rollalign
