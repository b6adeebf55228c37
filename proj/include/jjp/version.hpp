#pragma once

namespace jjp {
inline constexpr const char* kVersion = "0.1.0";
}
