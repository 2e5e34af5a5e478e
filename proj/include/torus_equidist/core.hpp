#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace torus_equidist {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Recoverable signal: the supplied working precision cannot certify the
/// requested answer. Callers own the retry loop (re-sample at higher
/// precision); the library never escalates on its own.
struct InsufficientPrecision {
  std::string detail;
};

/// Either a certified value or an InsufficientPrecision signal.
template <class T>
using Certified = std::variant<T, InsufficientPrecision>;

template <class T>
bool is_certified(const Certified<T>& c) {
  return std::holds_alternative<T>(c);
}

/// Returns the certified value or throws std::runtime_error carrying the
/// precision detail. For call sites that have already sized precision.
template <class T>
T certified_or_throw(Certified<T> c) {
  if (auto* v = std::get_if<T>(&c)) return std::move(*v);
  throw std::runtime_error("insufficient precision: " +
                           std::get<InsufficientPrecision>(c).detail);
}

/// Schema / configuration error. `pointer` is a JSON pointer (RFC 6901)
/// to the offending value.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : std::runtime_error(pointer.empty() ? message : pointer + ": " + message), pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace torus_equidist
