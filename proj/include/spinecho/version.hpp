#pragma once

namespace spinecho {
inline constexpr const char* kVersion = "0.1.0";
}
