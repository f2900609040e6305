#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hlab {

enum class NormKind { Euclidean, Sup, L1 };

std::string_view to_string(NormKind kind);
// Accepts "euclidean" | "sup" | "l1" (case-sensitive). Returns nullopt otherwise.
std::optional<NormKind> parse_norm_kind(std::string_view name);

// Element of R^d. Coordinates are always finite.
class Point {
 public:
  Point() = default;
  explicit Point(std::size_t dim, double fill = 0.0);
  explicit Point(std::vector<double> coords);
  Point(std::initializer_list<double> coords);

  std::size_t dim() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  double& operator[](std::size_t i) { return coords_[i]; }

  std::span<const double> coords() const noexcept { return coords_; }
  std::span<double> coords() noexcept { return coords_; }
  const std::vector<double>& vec() const noexcept { return coords_; }

  bool all_finite() const noexcept;

  Point& operator+=(const Point& other);
  Point& operator-=(const Point& other);
  Point& operator*=(double s);

  friend bool operator==(const Point&, const Point&) = default;

 private:
  std::vector<double> coords_;
};

Point operator+(Point a, const Point& b);
Point operator-(Point a, const Point& b);
Point operator*(double s, Point a);

// (1 - t) * a + t * b, evaluated coordinate-wise in that order.
Point lerp(const Point& a, const Point& b, double t);

double dot(const Point& a, const Point& b);

double norm(NormKind kind, std::span<const double> v);
double norm(NormKind kind, const Point& v);
// ||a - b|| without materialising the difference.
double distance(NormKind kind, const Point& a, const Point& b);

void require_same_dim(const Point& a, const Point& b, std::string_view context);

}  // namespace hlab
