#include "chronos/error.hpp"

namespace chronos {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ConstantSeries: return "ConstantSeries";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidM: return "InvalidM";
    case ErrorKind::DegenerateOutput: return "DegenerateOutput";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::Empty: return "Empty";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::RaggedRows: return "RaggedRows";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::TooSmall: return "TooSmall";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::Usage: return "Usage";
  }
  return "Unknown";
}

namespace {

std::string decorate(ErrorKind kind, const std::string& message, std::optional<std::size_t> line) {
  std::string out(to_string(kind));
  if (line) out += " (line " + std::to_string(*line) + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error(decorate(kind, message, line)), kind_(kind), line_(line) {}

}  // namespace chronos
