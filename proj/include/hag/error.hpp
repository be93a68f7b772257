#pragma once

#include <stdexcept>

namespace hag {

// Base of every error the library raises. The CLI maps subtrees to exit
// codes: validation 1, transport 2, search 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad parameters, malformed inputs, broken templates, schema violations.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed data files and records (names file/line/field where known).
class DataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Missing or inconsistent run configuration (unknown backend, absent
// defaults file, bad endpoint spec).
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Prompt template without the required placeholder.
class TemplateError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Network failure that persisted through the retry budget.
class TransportError : public Error {
public:
    using Error::Error;
};

// Endpoint answered with a non-success status; message carries a body excerpt.
class RemoteError : public TransportError {
public:
    using TransportError::TransportError;
};

// Search could not proceed (e.g. the pruning threshold removed every config).
class SearchError : public Error {
public:
    using Error::Error;
};

// Scripted backend ran out of responses.
class ScriptExhausted : public Error {
public:
    using Error::Error;
};

} // namespace hag
