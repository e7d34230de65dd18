#pragma once

namespace tvcast {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tvcast
