#pragma once

#include <string>
#include <vector>

namespace odc::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kRuntimeAbort = 3, kIo = 4 };

int run(int argc, char** argv);
// Same as run, with args excluding the program name.
int run(const std::vector<std::string>& args);

}  // namespace odc::cli
