#pragma once

#include <stdexcept>

namespace rlsched {

// Invalid configuration values or missing/malformed files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace rlsched
