#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dbp::cli {

/// Environment variable naming the directory for checkpoints when
/// `--ckpt` / `--out` are not given.
inline constexpr const char* kCheckpointDirEnv = "DBPNET_CKPT_DIR";

/// Exit codes: 0 success, 1 library error, 2 usage error. Every failure
/// prints one `error[CODE]: message` line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace dbp::cli
