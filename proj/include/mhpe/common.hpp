// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace mhpe {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * (kPi / 180.0); }
inline double rad2deg(double r) { return r * (180.0 / kPi); }

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentError : Error {
    using Error::Error;
};
struct NonFiniteError : Error {
    using Error::Error;
};
struct InvalidRotationError : Error {
    using Error::Error;
};
struct DegenerateGeometryError : Error {
    using Error::Error;
};
struct BehindCameraError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct PlacementError : Error {
    using Error::Error;
};
struct DivergenceError : Error {
    using Error::Error;
};

}  // namespace mhpe
