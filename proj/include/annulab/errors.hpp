#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace annulab {

// Error hierarchy shared by the library and the CLI. Each kind maps to a
// distinct process exit code so batch drivers can tell failures apart.
class Error : public std::runtime_error {
public:
  enum class Kind {
    Schema = 2,        // config / input file does not validate
    Budget = 3,        // depth budget exhausted mid-construction
    Precision = 4,     // certified error radius exceeds the requested tolerance
    Violation = 5,     // an invariant check found violations
    Resolution = 6,    // discretization too coarse for the requested query
    Precondition = 7,  // an operation precondition does not hold
    Io = 8,            // file system problems
    Domain = 9,        // argument outside the mathematical domain
  };

  Error(Kind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}

  Kind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }
  const char* kind_name() const {
    switch (kind_) {
      case Kind::Schema: return "schema";
      case Kind::Budget: return "budget";
      case Kind::Precision: return "precision";
      case Kind::Violation: return "violation";
      case Kind::Resolution: return "resolution";
      case Kind::Precondition: return "precondition";
      case Kind::Io: return "io";
      case Kind::Domain: return "domain";
    }
    return "unknown";
  }

private:
  Kind kind_;
};

struct SchemaError : Error {
  explicit SchemaError(std::string m) : Error(Kind::Schema, std::move(m)) {}
};
struct BudgetError : Error {
  explicit BudgetError(std::string m) : Error(Kind::Budget, std::move(m)) {}
};
struct PrecisionError : Error {
  explicit PrecisionError(std::string m) : Error(Kind::Precision, std::move(m)) {}
};
struct ViolationError : Error {
  explicit ViolationError(std::string m) : Error(Kind::Violation, std::move(m)) {}
};
struct ResolutionError : Error {
  explicit ResolutionError(std::string m) : Error(Kind::Resolution, std::move(m)) {}
};
struct PreconditionError : Error {
  explicit PreconditionError(std::string m) : Error(Kind::Precondition, std::move(m)) {}
};
struct IoError : Error {
  explicit IoError(std::string m) : Error(Kind::Io, std::move(m)) {}
};
struct DomainError : Error {
  explicit DomainError(std::string m) : Error(Kind::Domain, std::move(m)) {}
};

}  // namespace annulab
