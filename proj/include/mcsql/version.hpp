#pragma once

namespace mcsql {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mcsql
