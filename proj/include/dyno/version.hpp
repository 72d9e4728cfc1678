#pragma once

namespace dyno {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dyno
