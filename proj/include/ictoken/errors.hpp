#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace ictoken {

/// Every rejection the protocol can produce, named so harness scripts and
/// the CLI can assert on the exact class.
enum class ErrorClass {
  // crypto
  EmptyLeafSet,
  PlaintextTooLong,
  DecryptionFailure,
  // token model
  MalformedToken,
  EmptyIdentifier,
  // wallet
  NotHeld,
  MixedStages,
  EmptyList,
  TrackerUnavailable,
  // owner registry
  AlreadyEnrolled,
  ProfileMismatch,
  OwnerNotEnrolled,
  // enrollIC
  DuplicateICID,
  BadSignature,
  WrongStage,
  WrongStatus,
  NonEmptyComposition,
  BadVersion,
  // shared service checks
  UnknownICID,
  DefectiveToken,
  NotCurrentOwner,
  IllegalFieldChange,
  // updateStage
  StageRollback,
  StatusRollback,
  // updatePIDorEDID
  MixedOwners,
  BatchInvalid,
  MerkleMismatch,
  CompositionAlreadySet,
  // transferIC
  NewOwnerNotEnrolled,
  InProgress,
  KeyTrailBroken,
  // plumbing
  IoError,
  ParseError,
};

std::string_view errorClassName(ErrorClass c);

/// Parses the exact name produced by errorClassName; used by script files.
bool errorClassFromName(std::string_view name, ErrorClass& out);

struct Error {
  ErrorClass cls;
  std::string detail;

  std::string message() const {
    std::string m(errorClassName(cls));
    if (!detail.empty()) {
      m += ": ";
      m += detail;
    }
    return m;
  }
};

/// Thrown by constructors and wallet-side builders, where a failure is a
/// caller bug rather than data to be voted on.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ErrorClass cls, const std::string& detail)
      : std::runtime_error(Error{cls, detail}.message()), cls_(cls) {}

  ErrorClass cls() const { return cls_; }

 private:
  ErrorClass cls_;
};

/// Tracker services return rejections as values: an attack script expects
/// them, and consensus nodes vote on them.
template <typename T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Error err) : v_(std::move(err)) {}
  Result(ErrorClass cls, std::string detail) : v_(Error{cls, std::move(detail)}) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  const T& value() const { return std::get<T>(v_); }
  T& value() { return std::get<T>(v_); }
  const T& operator*() const { return value(); }
  const T* operator->() const { return &value(); }

  const Error& error() const { return std::get<Error>(v_); }

 private:
  std::variant<T, Error> v_;
};

struct Unit {};

}  // namespace ictoken
