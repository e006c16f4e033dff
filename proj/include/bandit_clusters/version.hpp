#pragma once

namespace bandits {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bandits
