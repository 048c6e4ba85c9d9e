#pragma once

#include <string>

#include "rollalign/refine.hpp"

namespace rollalign::cli {

// Runs a shell command per snippet. The command template may use {in}, {out}, {step} and
// {level}; {in} is an (n, H, W) float32 NPY file and the command must write {out} with the
// same shape.
class ExternalProcessHook final : public DenoiserHook {
public:
    explicit ExternalProcessHook(std::string command_template);

    SnippetFrames denoise(const SnippetFrames& noisy, int step, double noise_level) const override;
    bool thread_safe() const override { return false; }
    std::string name() const override { return "exec"; }

private:
    std::string template_;
};

}  // namespace rollalign::cli
