#ifndef REUSE_CLI_H_
#define REUSE_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace reuse {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes of every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace reuse

#endif  // REUSE_CLI_H_
