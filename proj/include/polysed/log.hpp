#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace polysed {

/// Shared stderr logger. Level comes from POLYSED_LOG (debug|info|warn), default info.
std::shared_ptr<spdlog::logger> logger();

}  // namespace polysed
