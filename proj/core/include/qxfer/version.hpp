#pragma once

#include <string_view>

namespace qxfer {

inline constexpr std::string_view k_code_version = "0.1.0";

} // namespace qxfer
