#pragma once

#include <stdexcept>
#include <string>

namespace coordfit {

// Base class for everything this library throws. Two families:
// InputError for bad files / bad arguments (CLI exit code 2) and
// FitError for numerical failures while fitting (CLI exit code 3).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InputError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

// ---- input / IO ----
struct IoError : InputError { using InputError::InputError; };
struct BadMagic : InputError { using InputError::InputError; };
struct UnsupportedDatatype : InputError { using InputError::InputError; };
struct TruncatedFile : InputError { using InputError::InputError; };
struct DimensionMismatch : InputError { using InputError::InputError; };
struct GridMismatch : InputError { using InputError::InputError; };
struct SpecInvalid : InputError { using InputError::InputError; };
struct InvalidArgument : InputError { using InputError::InputError; };

// ---- fitting ----
struct EmptyMask : FitError { using FitError::FitError; };
struct DegenerateGeometry : FitError { using FitError::FitError; };
struct SingularSystem : FitError { using FitError::FitError; };
struct OutOfSupport : FitError { using FitError::FitError; };
struct NoConsensus : FitError { using FitError::FitError; };
struct LogUndefined : FitError { using FitError::FitError; };
struct NoValidSupervoxels : FitError { using FitError::FitError; };

} // namespace coordfit
