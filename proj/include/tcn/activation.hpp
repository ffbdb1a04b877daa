#pragma once

#include <string>
#include <string_view>

namespace tcn {

enum class Activation { Identity, ReLU };

inline double activate(Activation a, double x) noexcept {
  return a == Activation::ReLU ? (x > 0.0 ? x : 0.0) : x;
}

/// Derivative at x; ReLU uses 0 at the kink.
inline double activate_derivative(Activation a, double x) noexcept {
  return a == Activation::ReLU ? (x > 0.0 ? 1.0 : 0.0) : 1.0;
}

std::string_view to_string(Activation a) noexcept;
Activation activation_from_string(std::string_view name);

}  // namespace tcn
