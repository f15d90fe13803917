#pragma once

#include <stdexcept>
#include <string>

namespace ablr {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input / validation failures (CLI exit code 2).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Runtime / model failures (CLI exit code 1).
class RuntimeError : public Error {
public:
    using Error::Error;
};

class MalformedFile : public ValidationError {
public:
    MalformedFile(const std::string& path, std::size_t row, const std::string& detail)
        : ValidationError("MalformedFile: " + path + ":" + std::to_string(row) + ": " + detail) {}
    MalformedFile(const std::string& path, const std::string& detail)
        : ValidationError("MalformedFile: " + path + ": " + detail) {}
};

class DuplicateEntry : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ScoreOutOfRange : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class UnknownDatasetInSplit : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class UnknownDataset : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class UnknownPipeline : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class EmptyColumn : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class DegenerateDataset : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DimensionMismatch : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class NonFiniteLoss : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class CholeskyFailure : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class AllEvaluated : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class ModelTrainedOnTestDataset : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class EmptyTrainingSet : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

}  // namespace ablr
