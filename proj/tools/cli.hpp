#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace contend::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPrecondition = 2;
inline constexpr int kExitInconclusive = 3;
inline constexpr int kExitSolver = 4;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace contend::cli
