#pragma once

namespace optosyn {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace optosyn
