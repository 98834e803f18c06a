#pragma once

namespace gpb {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gpb
