#pragma once

#include <spdlog/spdlog.h>

namespace gacg::harness {

// Sets the global log level from GACG_LOG_LEVEL (error, info or debug).
// Unset means info; an unrecognised value falls back to info with a warning.
void init_logging();

}  // namespace gacg::harness
