#pragma once

namespace mfmdp {
inline constexpr const char* kVersion = "0.1.0";
}
