#pragma once

namespace qkdring {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kEarthMuKm3PerS2 = 398600.4418;
// sidereal rotation rate
inline constexpr double kEarthRotationRadPerS = 7.2921159e-5;

inline constexpr double kSecondsPerDay = 86400.0;

}  // namespace qkdring
