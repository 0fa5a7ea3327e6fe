#pragma once

#include <string>
#include <vector>

#include "hita/model/device_model.hpp"

namespace hita::model {

enum class Severity { Error, Warning };

enum class DiagCode {
    DuplicateName,
    UnknownReference,
    TypeMismatch,
    EmptyEnum,
    InvalidDefault,
    ReservedName,
    MissingInitial,
    MissingOutcome,
    InvalidAction,
    Nondeterminism,
    PossibleOverlap,
};

std::string_view to_string(DiagCode c);

struct Diagnostic {
    Severity severity = Severity::Error;
    DiagCode code = DiagCode::TypeMismatch;
    std::string message;
    SourcePos pos;
};

// One diagnostic per violated invariant, empty for a well-formed model.
//
// Guard determinism: for every (state, trigger) pair the guards of the candidate
// transitions are checked pairwise by enumerating assignments to their leaves.
// Bool and enum references are enumerated over their domains; every other
// comparison becomes an opaque boolean atom, with `a > b` treated as the negation
// of `a <= b` (likewise >= / <, != / ==). A satisfying joint assignment over
// enumerable leaves only is a definite overlap (Nondeterminism); one that needs
// opaque atoms is reported as a PossibleOverlap warning, since atoms may be
// correlated. At runtime ties break by declaration order.
std::vector<Diagnostic> check_model(const DeviceModel& model);

// Rewrites bare identifiers that are not in scope into enum symbols. parse_model calls this.
void resolve_symbols(DeviceModel& model);

bool has_errors(const std::vector<Diagnostic>& diags);

}  // namespace hita::model
