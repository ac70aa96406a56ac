#pragma once

// Loop-level re-implementation of the decoder chain and its cost, written
// against plain std::vector so it shares no arithmetic with the library.

#include <cmath>
#include <vector>

#include "tbrain/model.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major

inline Mat to_mat(const tbrain::Matrix& m) {
  Mat out(m.rows(), Vec(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline Vec to_vec(const tbrain::Vector& v) { return Vec(v.data(), v.data() + v.size()); }

inline Vec matvec(const Mat& m, const Vec& x) {
  Vec out(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += m[i][j] * x[j];
    out[i] = acc;
  }
  return out;
}

inline Vec add(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Vec logistic(const Vec& x) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return out;
}

inline Vec column(const Mat& m, std::size_t j) {
  Vec out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i][j];
  return out;
}

// logits_k = sum_i A[i][offset + k] * q[i]
inline Vec logits(const Mat& a, std::size_t offset, std::size_t count, const Vec& q) {
  Vec out(count, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) acc += a[i][offset + k] * q[i];
    out[k] = acc;
  }
  return out;
}

inline double neg_log_prob(const Vec& z, std::size_t k) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  return -(z[k] - m - std::log(sum));
}

struct Params {
  Mat A, A_in, D, V, W, B;
  std::size_t n_e = 0, n_p = 0;
  bool skip = false;

  explicit Params(const tbrain::ModelParams& p)
      : A(to_mat(p.A)),
        A_in(to_mat(p.tie_weights ? p.A : p.A_in)),
        D(to_mat(p.D)),
        V(to_mat(p.V)),
        W(to_mat(p.W)),
        B(to_mat(p.B)),
        n_e(p.dims.num_concepts),
        n_p(p.dims.num_predicates),
        skip(p.use_skip) {}
};

struct Chain {
  Vec z_sub, z_obj, z_pred;
  Vec q_sub, q_obj, q_pred;
  Vec h_s, h_so, h_spo, q_final;
};

inline Vec readout(const Params& p, const Vec& h) { return matvec(p.W, logistic(matvec(p.B, h))); }

inline Vec update(const Params& p, const Vec& embedding, const Vec& mem, const Vec& x, const Vec* h_prev) {
  Vec pre = matvec(p.V, add(add(embedding, mem), x));
  if (p.skip && h_prev != nullptr) pre = add(pre, matvec(p.B, *h_prev));
  return logistic(pre);
}

// Teacher-forced chain on representation inputs x_sub, x_pred, x_obj.
inline Chain run(const Params& p, const Vec& x_sub, const Vec& x_pred, const Vec& x_obj, std::size_t s,
                 std::size_t pr, std::size_t o) {
  Chain c;
  c.q_sub = x_sub;
  c.z_sub = logits(p.A, 0, p.n_e, c.q_sub);
  const Vec zero(x_sub.size(), 0.0);
  c.h_s = update(p, column(p.A_in, s), zero, x_sub, nullptr);
  const Vec m_s = readout(p, c.h_s);
  c.q_obj = add(x_obj, m_s);
  c.z_obj = logits(p.A, 0, p.n_e, c.q_obj);
  c.h_so = update(p, column(p.A_in, o), m_s, x_obj, &c.h_s);
  const Vec m_so = readout(p, c.h_so);
  c.q_pred = add(x_pred, m_so);
  c.z_pred = logits(p.A, p.n_e, p.n_p, c.q_pred);
  c.h_spo = update(p, column(p.A_in, p.n_e + pr), m_so, x_pred, &c.h_so);
  c.q_final = readout(p, c.h_spo);
  return c;
}

inline double cost(const Chain& c, std::size_t s, std::size_t pr, std::size_t o) {
  return neg_log_prob(c.z_sub, s) + neg_log_prob(c.z_obj, o) + neg_log_prob(c.z_pred, pr);
}

inline double max_abs_diff(const Vec& a, const tbrain::Vector& b) {
  double m = a.size() == static_cast<std::size_t>(b.size()) ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < a.size() && i < static_cast<std::size_t>(b.size()); ++i)
    m = std::max(m, std::abs(a[i] - b[static_cast<Eigen::Index>(i)]));
  return m;
}

}  // namespace oracle
