#pragma once

namespace otc {

inline constexpr const char* kVersion = "0.1.0";

}
