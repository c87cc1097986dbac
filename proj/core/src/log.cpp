#include "sshlab/log.hpp"

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <memory>
#include <string>
#include <vector>

namespace sshlab {

void configure_logging(std::string_view level, const std::optional<std::filesystem::path>& file) {
  std::vector<spdlog::sink_ptr> sinks;
  auto console = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
  console->set_level(spdlog::level::warn);
  sinks.push_back(console);
  if (file) {
    auto file_sink = std::make_shared<spdlog::sinks::basic_file_sink_mt>(file->string(), true);
    file_sink->set_level(spdlog::level::trace);
    sinks.push_back(file_sink);
  }
  auto logger = std::make_shared<spdlog::logger>("sshlab", sinks.begin(), sinks.end());
  logger->set_level(spdlog::level::from_str(std::string(level)));
  logger->flush_on(spdlog::level::info);
  spdlog::set_default_logger(logger);
}

}  // namespace sshlab
