#pragma once

namespace subpix {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace subpix
