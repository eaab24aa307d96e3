#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "truelearn/annotation.hpp"

namespace truelearn::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kServiceError = 3,
};

inline constexpr const char* kDefaultApiKeyEnv = "WIKIFIER_API_KEY";

// Hooks that tests replace.
struct Environment {
  std::function<std::optional<std::string>(const std::string&)> getenv;
  std::function<std::unique_ptr<EntityLinker>(const WikifierOptions&)> make_linker;
};

Environment default_environment();

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Environment& env = default_environment());

}  // namespace truelearn::cli
