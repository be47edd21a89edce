#pragma once

namespace recert {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace recert
