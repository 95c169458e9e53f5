#ifndef LIDARPIPE_TOOLS_CLI_H_
#define LIDARPIPE_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace lidarpipe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

// Runs one invocation. `args` excludes the program name. Primary output goes
// to `out`; timing lines, diagnostics and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lidarpipe::cli

#endif  // LIDARPIPE_TOOLS_CLI_H_
