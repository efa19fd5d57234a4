#include "ictoken/errors.hpp"

#include <array>
#include <utility>

namespace ictoken {

namespace {
constexpr std::array<std::pair<ErrorClass, std::string_view>, 32> kNames{{
    {ErrorClass::EmptyLeafSet, "EmptyLeafSet"},
    {ErrorClass::PlaintextTooLong, "PlaintextTooLong"},
    {ErrorClass::DecryptionFailure, "DecryptionFailure"},
    {ErrorClass::MalformedToken, "MalformedToken"},
    {ErrorClass::EmptyIdentifier, "EmptyIdentifier"},
    {ErrorClass::NotHeld, "NotHeld"},
    {ErrorClass::MixedStages, "MixedStages"},
    {ErrorClass::EmptyList, "EmptyList"},
    {ErrorClass::TrackerUnavailable, "TrackerUnavailable"},
    {ErrorClass::AlreadyEnrolled, "AlreadyEnrolled"},
    {ErrorClass::ProfileMismatch, "ProfileMismatch"},
    {ErrorClass::OwnerNotEnrolled, "OwnerNotEnrolled"},
    {ErrorClass::DuplicateICID, "DuplicateICID"},
    {ErrorClass::BadSignature, "BadSignature"},
    {ErrorClass::WrongStage, "WrongStage"},
    {ErrorClass::WrongStatus, "WrongStatus"},
    {ErrorClass::NonEmptyComposition, "NonEmptyComposition"},
    {ErrorClass::BadVersion, "BadVersion"},
    {ErrorClass::UnknownICID, "UnknownICID"},
    {ErrorClass::DefectiveToken, "DefectiveToken"},
    {ErrorClass::NotCurrentOwner, "NotCurrentOwner"},
    {ErrorClass::IllegalFieldChange, "IllegalFieldChange"},
    {ErrorClass::StageRollback, "StageRollback"},
    {ErrorClass::StatusRollback, "StatusRollback"},
    {ErrorClass::MixedOwners, "MixedOwners"},
    {ErrorClass::BatchInvalid, "BatchInvalid"},
    {ErrorClass::MerkleMismatch, "MerkleMismatch"},
    {ErrorClass::CompositionAlreadySet, "CompositionAlreadySet"},
    {ErrorClass::NewOwnerNotEnrolled, "NewOwnerNotEnrolled"},
    {ErrorClass::InProgress, "InProgress"},
    {ErrorClass::KeyTrailBroken, "KeyTrailBroken"},
    {ErrorClass::IoError, "IoError"},
}};
}  // namespace

std::string_view errorClassName(ErrorClass c) {
  for (const auto& [cls, name] : kNames)
    if (cls == c) return name;
  return "ParseError";
}

bool errorClassFromName(std::string_view name, ErrorClass& out) {
  for (const auto& [cls, n] : kNames) {
    if (n == name) {
      out = cls;
      return true;
    }
  }
  if (name == "ParseError") {
    out = ErrorClass::ParseError;
    return true;
  }
  return false;
}

}  // namespace ictoken
