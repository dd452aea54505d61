#pragma once

#include <stdexcept>
#include <string>

namespace brevity {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Problems with the input data or its schema. The CLI maps these to the data exit code.
class DataError : public Error {
public:
    using Error::Error;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

class TargetError : public DataError {
public:
    using DataError::DataError;
};

class EmptyDatasetError : public DataError {
public:
    using DataError::DataError;
};

class ScalingError : public DataError {
public:
    using DataError::DataError;
};

class SplitError : public DataError {
public:
    using DataError::DataError;
};

class FoldError : public DataError {
public:
    using DataError::DataError;
};

/// The search budget ran out before a single formula was scored.
class NoIncumbentError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

} // namespace brevity
