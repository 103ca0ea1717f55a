#pragma once

#include <stdexcept>
#include <string>

namespace patchforge {

// Base for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad shapes, bad option values, unknown configuration keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Step counts or timesteps outside the schedule.
class RangeError : public Error {
public:
    using Error::Error;
};

// Caller handed us malformed data (empty records, zero-norm embeddings, ...).
class InputError : public Error {
public:
    using Error::Error;
};

// A component lacks the feature the operation needs.
class CapabilityError : public Error {
public:
    using Error::Error;
};

// The backend produced garbage (non-finite values).
class BackendFault : public Error {
public:
    using Error::Error;
};

// Network-level failure talking to a remote oracle.
class TransportError : public Error {
public:
    using Error::Error;
};

// The remote oracle answered, but not in the agreed format.
class ProtocolError : public Error {
public:
    using Error::Error;
};

// Landmark detection found no face.
class DetectionError : public Error {
public:
    using Error::Error;
};

// A UV map claims validity at a texel with out-of-range coordinates.
class MapIntegrityError : public Error {
public:
    using Error::Error;
};

// Threshold calibration given a single-class pair set.
class CalibrationError : public Error {
public:
    using Error::Error;
};

// Dataset directory does not satisfy the expected layout.
class DatasetError : public Error {
public:
    using Error::Error;
};

}  // namespace patchforge
