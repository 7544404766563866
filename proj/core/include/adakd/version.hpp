#pragma once

namespace adakd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace adakd
