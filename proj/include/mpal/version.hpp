#pragma once

namespace mpal {

inline constexpr const char* kVersion = "0.1.0";

} // namespace mpal
