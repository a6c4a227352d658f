#pragma once
#include <cassert>
#include <optional>
#include <string>
#include <utility>

namespace atx {

enum class Err {
  None = 0,
  // crypto
  InsufficientShares,
  InvalidShare,
  NotAMember,
  // arithmetic
  Overflow,
  // core types
  Malformed,
  // cod
  InvalidMessages,
  CoverageAssertFailed,
  // simulator / tooling
  ConfigError,
  NotFailureFree,
  BoundExceeded,
  // generic protocol-level failure (refused transfer, cancelled debit)
  Failed,
};

inline const char* errName(Err e) {
  switch (e) {
    case Err::None: return "none";
    case Err::InsufficientShares: return "insufficient-shares";
    case Err::InvalidShare: return "invalid-share";
    case Err::NotAMember: return "not-a-member";
    case Err::Overflow: return "overflow";
    case Err::Malformed: return "malformed";
    case Err::InvalidMessages: return "invalid-messages";
    case Err::CoverageAssertFailed: return "coverage-assert-failed";
    case Err::ConfigError: return "config-error";
    case Err::NotFailureFree: return "not-failure-free";
    case Err::BoundExceeded: return "bound-exceeded";
    case Err::Failed: return "failed";
  }
  return "?";
}

// Small expected-style carrier.  A Result either holds a value or an error
// code plus a short human-readable note.
template <typename T>
class Result {
 public:
  Result(T v) : value_(std::move(v)) {}  // NOLINT: implicit by design
  Result(Err e, std::string note = "") : err_(e), note_(std::move(note)) {
    assert(e != Err::None);
  }
  bool ok() const { return value_.has_value(); }
  explicit operator bool() const { return ok(); }
  const T& operator*() const { return *value_; }
  T& operator*() { return *value_; }
  const T* operator->() const { return &*value_; }
  T* operator->() { return &*value_; }
  T take() { return std::move(*value_); }
  Err error() const { return ok() ? Err::None : err_; }
  const std::string& note() const { return note_; }

 private:
  std::optional<T> value_;
  Err err_ = Err::None;
  std::string note_;
};

struct Unit {};
using Status = Result<Unit>;
inline Status okStatus() { return Status(Unit{}); }

}  // namespace atx
