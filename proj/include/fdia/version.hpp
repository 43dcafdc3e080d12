#pragma once

namespace fdia {

inline constexpr const char* version = "0.1.0";

}  // namespace fdia
