#pragma once

#include <stdexcept>
#include <string>

namespace wavecast {

enum class ErrorKind {
  Shape,
  Format,
  Domain,
  Config,
  Data,
  Contract,
  Stats,
  Bounds,
  EmptySelection,
  UndefinedScore,
  Usage,
  ConfigConflict,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Contract: return "contract error";
    case ErrorKind::Stats: return "stats error";
    case ErrorKind::Bounds: return "bounds error";
    case ErrorKind::EmptySelection: return "empty-selection error";
    case ErrorKind::UndefinedScore: return "undefined-score error";
    case ErrorKind::Usage: return "usage error";
    case ErrorKind::ConfigConflict: return "config conflict";
  }
  return "error";
}

/// Base of every error raised by the library. The kind decides the CLI exit
/// code: 2 usage, 3 data, 4 contract.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindError : public Error {
 public:
  explicit KindError(const std::string& message) : Error(K, message) {}
};

using ShapeError = KindError<ErrorKind::Shape>;
using FormatError = KindError<ErrorKind::Format>;
using DomainError = KindError<ErrorKind::Domain>;
using ConfigError = KindError<ErrorKind::Config>;
using DataError = KindError<ErrorKind::Data>;
using ContractError = KindError<ErrorKind::Contract>;
using StatsError = KindError<ErrorKind::Stats>;
using BoundsError = KindError<ErrorKind::Bounds>;
using EmptySelectionError = KindError<ErrorKind::EmptySelection>;
using UndefinedScoreError = KindError<ErrorKind::UndefinedScore>;
using UsageError = KindError<ErrorKind::Usage>;
using ConfigConflictError = KindError<ErrorKind::ConfigConflict>;

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::Config:
    case ErrorKind::Bounds:
      return 2;
    case ErrorKind::Format:
    case ErrorKind::Data:
    case ErrorKind::Domain:
    case ErrorKind::Stats:
    case ErrorKind::EmptySelection:
    case ErrorKind::UndefinedScore:
      return 3;
    case ErrorKind::Shape:
    case ErrorKind::Contract:
    case ErrorKind::ConfigConflict:
      return 4;
  }
  return 1;
}

}  // namespace wavecast
