#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace hsd {

// Fixed class index order used everywhere: weights, confusion matrices,
// probability vectors.
enum class ClassLabel : int { Clean = 0, Offensive = 1, Hate = 2 };

constexpr int kNumClasses = 3;

inline const char* class_name(ClassLabel c) {
  switch (c) {
    case ClassLabel::Clean: return "clean";
    case ClassLabel::Offensive: return "offensive";
    case ClassLabel::Hate: return "hate";
  }
  return "?";
}

inline ClassLabel parse_class(const std::string& s) {
  if (s == "clean") return ClassLabel::Clean;
  if (s == "offensive") return ClassLabel::Offensive;
  if (s == "hate") return ClassLabel::Hate;
  throw std::invalid_argument("unknown class label: '" + s + "'");
}

// Per-class loss weights, indexed (clean, offensive, hate).
struct ClassWeights {
  std::array<double, kNumClasses> w{1.0, 1.0, 1.0};
  double operator[](int i) const { return w[i]; }
  void validate() const {
    for (double v : w) {
      if (!(v > 0.0)) throw std::invalid_argument("class weights must be positive");
    }
  }
};

using ProbabilityTriple = std::array<double, kNumClasses>;

// Argmax with ties broken toward the more severe class (hate > offensive > clean).
inline ClassLabel severity_argmax(const ProbabilityTriple& p) {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (p[c] >= p[best]) best = c;
  }
  return static_cast<ClassLabel>(best);
}

}  // namespace hsd
