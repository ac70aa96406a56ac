#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace tbrain {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Componentwise logistic.
inline Vector sigmoid(const Vector& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

// Max-shifted softmax.
inline Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

inline double log_sum_exp(const Vector& logits) {
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

// -log softmax(logits)[k]
inline double neg_log_softmax(const Vector& logits, Eigen::Index k) {
  return log_sum_exp(logits) - logits[k];
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

// Index of the maximum, lowest index on ties.
inline Eigen::Index argmax(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace tbrain
