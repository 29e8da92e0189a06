#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

namespace hetadmit::cli {

/// Entry point of the `hetadmit` tool. Returns 0 on success, 1 on runtime or
/// partial failure and 2 on usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Markdown summary of every recognised JSON artifact in `run_dir`. Files that
/// cannot be read are listed under "Unreadable files" and set `failed`.
std::string render_report(const std::filesystem::path& run_dir, bool& failed);

}  // namespace hetadmit::cli
