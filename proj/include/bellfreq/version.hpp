#pragma once

namespace bellfreq {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bellfreq
