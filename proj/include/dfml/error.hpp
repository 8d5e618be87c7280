#pragma once

#include <stdexcept>
#include <string>

namespace dfml {

/// Broad failure class. The CLI maps these onto exit codes 1, 2 and 3.
enum class ErrorCategory { Usage, Data, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define DFML_DEFINE_ERROR(Name, Category)                  \
  class Name : public Error {                              \
   public:                                                 \
    explicit Name(const std::string& what)                 \
        : Error(ErrorCategory::Category, #Name ": " + what) {} \
  };

// Caller mistakes: shapes, indices, parameter ranges.
DFML_DEFINE_ERROR(InvalidArgument, Usage)
DFML_DEFINE_ERROR(DimensionMismatch, Usage)
DFML_DEFINE_ERROR(IndexOutOfRange, Usage)
DFML_DEFINE_ERROR(InvalidProjectionSize, Usage)
DFML_DEFINE_ERROR(InstanceTooLarge, Usage)

// Input data problems.
DFML_DEFINE_ERROR(ParseError, Data)
DFML_DEFINE_ERROR(IoError, Data)
DFML_DEFINE_ERROR(BadMagic, Data)
DFML_DEFINE_ERROR(TruncatedFile, Data)
DFML_DEFINE_ERROR(CountMismatch, Data)
DFML_DEFINE_ERROR(EmptyDataset, Data)
DFML_DEFINE_ERROR(TooFewFeatures, Data)

// Iterative methods that failed to settle, or blew up.
DFML_DEFINE_ERROR(NonConvergence, Numerical)
DFML_DEFINE_ERROR(NumericalDivergence, Numerical)

#undef DFML_DEFINE_ERROR

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace dfml
