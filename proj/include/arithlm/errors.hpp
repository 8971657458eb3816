#pragma once

#include <stdexcept>
#include <string>

namespace arithlm {

// Every failure raised by the library derives from Error so callers (the CLI in
// particular) can map it to an exit code without caring about the subtype.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class IndexError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class ConditioningError : public Error { using Error::Error; };
class PreconditionError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class DivergenceError : public Error { using Error::Error; };

}  // namespace arithlm
