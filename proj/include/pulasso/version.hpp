#pragma once

namespace pulasso {

inline constexpr const char* version() { return "0.1.0"; }

} // namespace pulasso
