#pragma once

#include <stdexcept>
#include <string>

namespace diffmia {

// Error taxonomy maps onto CLI exit codes:
//   ConfigError -> 1 (usage / bad configuration)
//   DataError   -> 2 (missing or malformed input data)
//   NumericError / ContractViolation -> 3 (numeric failure, broken internal contract)
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace diffmia
