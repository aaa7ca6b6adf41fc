#pragma once

#include <cmath>

namespace dotrecon {

/// Point / vector in the (x, z) measurement plane. Units: millimeters.
struct Vec2 {
  double x = 0.0;
  double z = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.z + b.z}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.z - b.z}; }
  friend Vec2 operator*(double c, Vec2 a) { return {c * a.x, c * a.z}; }
  friend Vec2 operator*(Vec2 a, double c) { return {c * a.x, c * a.z}; }
  friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.z == b.z; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.z * b.z; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.z - a.z * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.z); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

}  // namespace dotrecon
