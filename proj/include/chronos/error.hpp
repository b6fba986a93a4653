#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chronos {

/// Error classes raised by the library. The numeric values double as the
/// command-line exit codes (offset by 10), so never renumber existing entries.
enum class ErrorKind {
  ConstantSeries = 1,
  LengthMismatch = 2,
  InvalidM = 3,
  DegenerateOutput = 4,
  InsufficientData = 5,
  DimensionMismatch = 6,
  Empty = 7,
  KTooLarge = 8,
  SizeMismatch = 9,
  ParseError = 10,
  RaggedRows = 11,
  EmptyFile = 12,
  TooSmall = 13,
  MissingArtifact = 14,
  InvalidArgument = 15,
  DuplicateId = 16,
  Usage = 17,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  /// 1-based input line for ParseError / RaggedRows.
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> line_;
};

inline int exit_code(ErrorKind kind) noexcept { return 10 + static_cast<int>(kind); }

}  // namespace chronos
