#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

namespace sshlab {

// Routes library diagnostics to stderr and, optionally, to a log file.
// level is one of trace, debug, info, warn, error, off.
void configure_logging(std::string_view level, const std::optional<std::filesystem::path>& file = {});

}  // namespace sshlab
