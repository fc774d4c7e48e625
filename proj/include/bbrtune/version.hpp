#pragma once

namespace bbrtune {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bbrtune
