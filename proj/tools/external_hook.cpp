#include "external_hook.hpp"

#include <cstdlib>
#include <filesystem>
#include <unistd.h>

#include "rollalign/npy.hpp"

namespace rollalign::cli {

namespace fs = std::filesystem;

namespace {

void replace_all(std::string& text, const std::string& key, const std::string& value) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
        text.replace(pos, key.size(), value);
}

}  // namespace

ExternalProcessHook::ExternalProcessHook(std::string command_template)
    : template_(std::move(command_template)) {
    if (template_.find("{in}") == std::string::npos || template_.find("{out}") == std::string::npos)
        throw InvalidArgument("exec hook command must reference {in} and {out}");
}

SnippetFrames ExternalProcessHook::denoise(const SnippetFrames& noisy, int step,
                                           double noise_level) const {
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path() /
                         ("rollalign_hook_" + std::to_string(::getpid()) + "_" +
                          std::to_string(counter++));
    fs::create_directories(dir);
    const fs::path in = dir / "in.npy";
    const fs::path out = dir / "out.npy";
    const std::size_t shape[] = {static_cast<std::size_t>(noisy.length),
                                 static_cast<std::size_t>(noisy.height),
                                 static_cast<std::size_t>(noisy.width)};
    npy::write(in, noisy.values, shape);

    std::string command = template_;
    replace_all(command, "{in}", in.string());
    replace_all(command, "{out}", out.string());
    replace_all(command, "{step}", std::to_string(step));
    replace_all(command, "{level}", std::to_string(noise_level));
    const int status = std::system(command.c_str());
    if (status != 0 || !fs::exists(out)) {
        fs::remove_all(dir);
        throw HookFailure("exec hook command failed: " + command);
    }
    auto arr = npy::read_f32(out);
    fs::remove_all(dir);
    if (arr.shape.size() != 3)
        throw HookFailure("exec hook wrote an array that is not (n, H, W)");
    return SnippetFrames{static_cast<int>(arr.shape[0]), static_cast<int>(arr.shape[1]),
                         static_cast<int>(arr.shape[2]), std::move(arr.data)};
}

}  // namespace rollalign::cli
