#pragma once

#include <stdexcept>
#include <string>

namespace srcd {

/// Base class for recoverable domain errors. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Image has no valid pixel pair for the requested co-occurrence offset.
class DegenerateImage : public Error {
public:
    using Error::Error;
};

/// Image is below the minimum size for patch selection.
class ImageTooSmall : public Error {
public:
    using Error::Error;
};

/// Feature length is not divisible by the attribute count.
class IndivisibleDimension : public Error {
public:
    using Error::Error;
};

/// Attribute weights sum to zero; weighted similarity is undefined.
class DegenerateWeights : public Error {
public:
    using Error::Error;
};

/// A relation graph requires at least one node per domain.
class EmptyDomain : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

/// Prototype set pushed out of iteration order.
class StaleSet : public Error {
public:
    using Error::Error;
};

class ConfigInvalid : public Error {
public:
    using Error::Error;
};

}  // namespace srcd
