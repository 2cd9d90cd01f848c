#pragma once

namespace metamix {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace metamix
