#pragma once

#include <iosfwd>

namespace spnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spnn::cli
