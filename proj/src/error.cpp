#include "canopydw/error.hpp"

namespace canopydw {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidDate: return "invalid-date";
    case ErrorKind::InvalidMetadata: return "invalid-metadata";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Range: return "range";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::CorruptTable: return "corrupt-table";
    case ErrorKind::Io: return "io";
    case ErrorKind::UnknownSpecies: return "unknown-species";
    case ErrorKind::Duplicate: return "duplicate";
    case ErrorKind::StaleMatch: return "stale-match";
    case ErrorKind::UnknownId: return "unknown-id";
    case ErrorKind::InvalidSpec: return "invalid-spec";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::EmptyWarehouse: return "empty-warehouse";
    case ErrorKind::Locked: return "locked";
    case ErrorKind::MixedUnits: return "mixed-units";
    case ErrorKind::Usage: return "usage";
    }
    return "unknown";
}

} // namespace canopydw
