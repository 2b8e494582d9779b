#pragma once

#include <stdexcept>
#include <string>

namespace pyrflow {

// Exit-code classes used by the command line front end.
enum class ErrorKind {
    Validation = 1,
    Io = 2,
    Invariant = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define PYRFLOW_DEFINE_ERROR(Name, Kind)                                          \
    class Name : public Error {                                                   \
    public:                                                                       \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {}  \
    }

PYRFLOW_DEFINE_ERROR(ShapeError, Validation);
PYRFLOW_DEFINE_ERROR(ValidationError, Validation);
PYRFLOW_DEFINE_ERROR(ConfigError, Validation);
PYRFLOW_DEFINE_ERROR(FormatError, Validation);
PYRFLOW_DEFINE_ERROR(LengthError, Validation);
PYRFLOW_DEFINE_ERROR(ArchiveError, Validation);
PYRFLOW_DEFINE_ERROR(EmptyDomainError, Validation);
PYRFLOW_DEFINE_ERROR(IoError, Io);
PYRFLOW_DEFINE_ERROR(InvariantError, Invariant);

#undef PYRFLOW_DEFINE_ERROR

}  // namespace pyrflow
