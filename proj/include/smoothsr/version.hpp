#pragma once

namespace smoothsr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace smoothsr
