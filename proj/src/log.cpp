#include "polysed/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace polysed {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto log = spdlog::stderr_color_mt("polysed");
    log->set_pattern("[%l] %v");
    auto level = spdlog::level::info;
    if (const char* env = std::getenv("POLYSED_LOG")) {
      std::string_view v{env};
      if (v == "debug") level = spdlog::level::debug;
      else if (v == "warn") level = spdlog::level::warn;
    }
    log->set_level(level);
    return log;
  }();
  return instance;
}

}  // namespace polysed
