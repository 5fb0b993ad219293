#pragma once

#include <stdexcept>
#include <string>

namespace gola {

// Root of every exception the library throws. The CLI maps the concrete
// subclass onto its exit-code contract (2 input, 3 I/O, 4 numeric).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dimension mismatch between matrices.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Out-of-range or inconsistent parameter (k, n, rank, pair indices, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Malformed value: non-finite entries, bad permutation, invalid box, ...
class ValidationError : public Error {
public:
    using Error::Error;
};

// Input that carries no usable signal (e.g. a matrix with fewer than two columns to center).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Non-finite loss or divergence during training.
class NumericError : public Error {
public:
    using Error::Error;
};

// File system failures and unreadable/corrupt files.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace gola
