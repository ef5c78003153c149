#ifndef NNSUB_ERROR_HPP
#define NNSUB_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace nnsub {

// Numeric values are shared with nnsub_status in nnsub.h.
enum class ErrorCode : int {
  Dimension = 1,
  Numeric = 2,
  NonNegativity = 3,
  LabelMismatch = 4,
  Parse = 5,
  Label = 6,
  InsufficientSamples = 7,
  Config = 8,
  Io = 9,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define NNSUB_DEFINE_ERROR(Name, Code)                                    \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(Code, message) {}   \
  };

NNSUB_DEFINE_ERROR(DimensionError, ErrorCode::Dimension)
NNSUB_DEFINE_ERROR(NumericError, ErrorCode::Numeric)
NNSUB_DEFINE_ERROR(NonNegativityError, ErrorCode::NonNegativity)
NNSUB_DEFINE_ERROR(LabelMismatchError, ErrorCode::LabelMismatch)
NNSUB_DEFINE_ERROR(LabelError, ErrorCode::Label)
NNSUB_DEFINE_ERROR(InsufficientSamplesError, ErrorCode::InsufficientSamples)
NNSUB_DEFINE_ERROR(ConfigError, ErrorCode::Config)
NNSUB_DEFINE_ERROR(IoError, ErrorCode::Io)

#undef NNSUB_DEFINE_ERROR

class ParseError : public Error {
 public:
  // line is 1-based; 0 means the error is not tied to a line.
  ParseError(const std::string& message, std::size_t line)
      : Error(ErrorCode::Parse,
              line ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace nnsub

#endif  // NNSUB_ERROR_HPP
