#include "hlab/point.hpp"

#include <algorithm>
#include <cmath>

#include "hlab/error.hpp"

namespace hlab {

std::string_view to_string(NormKind kind) {
  switch (kind) {
    case NormKind::Euclidean:
      return "euclidean";
    case NormKind::Sup:
      return "sup";
    case NormKind::L1:
      return "l1";
  }
  return "?";
}

std::optional<NormKind> parse_norm_kind(std::string_view name) {
  if (name == "euclidean") return NormKind::Euclidean;
  if (name == "sup") return NormKind::Sup;
  if (name == "l1") return NormKind::L1;
  return std::nullopt;
}

Point::Point(std::size_t dim, double fill) : coords_(dim, fill) {
  if (dim == 0) throw DimensionError("Point: dimension must be positive");
  if (!std::isfinite(fill)) throw DomainError("Point: non-finite fill value");
}

Point::Point(std::vector<double> coords) : coords_(std::move(coords)) {
  if (coords_.empty()) throw DimensionError("Point: dimension must be positive");
  if (!all_finite()) throw DomainError("Point: non-finite coordinate");
}

Point::Point(std::initializer_list<double> coords) : Point(std::vector<double>(coords)) {}

bool Point::all_finite() const noexcept {
  return std::all_of(coords_.begin(), coords_.end(), [](double v) { return std::isfinite(v); });
}

Point& Point::operator+=(const Point& other) {
  require_same_dim(*this, other, "Point::operator+=");
  for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] += other.coords_[i];
  return *this;
}

Point& Point::operator-=(const Point& other) {
  require_same_dim(*this, other, "Point::operator-=");
  for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] -= other.coords_[i];
  return *this;
}

Point& Point::operator*=(double s) {
  for (double& v : coords_) v *= s;
  return *this;
}

Point operator+(Point a, const Point& b) { return a += b; }
Point operator-(Point a, const Point& b) { return a -= b; }
Point operator*(double s, Point a) { return a *= s; }

Point lerp(const Point& a, const Point& b, double t) {
  require_same_dim(a, b, "lerp");
  Point out = a;
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = (1.0 - t) * a[i] + t * b[i];
  return out;
}

double dot(const Point& a, const Point& b) {
  require_same_dim(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

double norm(NormKind kind, std::span<const double> v) {
  switch (kind) {
    case NormKind::Euclidean: {
      // hypot-style scaling keeps tiny and huge vectors accurate.
      double scale = 0.0;
      for (double c : v) scale = std::max(scale, std::abs(c));
      if (scale == 0.0) return 0.0;
      double s = 0.0;
      for (double c : v) {
        const double r = c / scale;
        s += r * r;
      }
      return scale * std::sqrt(s);
    }
    case NormKind::Sup: {
      double m = 0.0;
      for (double c : v) m = std::max(m, std::abs(c));
      return m;
    }
    case NormKind::L1: {
      double s = 0.0;
      for (double c : v) s += std::abs(c);
      return s;
    }
  }
  return 0.0;
}

double norm(NormKind kind, const Point& v) { return norm(kind, v.coords()); }

double distance(NormKind kind, const Point& a, const Point& b) {
  require_same_dim(a, b, "distance");
  thread_local std::vector<double> scratch;
  scratch.resize(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) scratch[i] = a[i] - b[i];
  return norm(kind, std::span<const double>(scratch));
}

void require_same_dim(const Point& a, const Point& b, std::string_view context) {
  if (a.dim() != b.dim()) {
    throw DimensionError(std::string(context) + ": dimension mismatch (" + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()) + ")");
  }
}

}  // namespace hlab
