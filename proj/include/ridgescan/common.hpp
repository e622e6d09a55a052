#pragma once

#include <stdexcept>
#include <string>

namespace ridgescan {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied data or configuration (maps to CLI exit code 2).
class input_error : public error {
public:
    using error::error;
};

/// A ridge search that produced no surviving points (maps to CLI exit code 3).
class empty_ridge_error : public error {
public:
    using error::error;
};

/// Numerical breakdown inside an otherwise valid computation
/// (eigengap collapse, rank-deficient M, singular subspace Hessian, ...).
class numeric_error : public error {
public:
    using error::error;
};

} // namespace ridgescan
