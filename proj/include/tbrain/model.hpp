#pragma once

// Parameters of the four-layer decoder and their TBRAIN1 binary persistence.

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "tbrain/error.hpp"
#include "tbrain/linalg.hpp"
#include "tbrain/random.hpp"

namespace tbrain {

struct ModelDims {
  std::uint32_t num_concepts = 0;    // N_E
  std::uint32_t num_predicates = 0;  // N_P
  std::uint32_t d_g = 64;
  std::uint32_t d_q = 32;
  std::uint32_t d_h = 64;

  bool operator==(const ModelDims&) const = default;
};

// One representation-layer vector per box role: sensory D*g, an episodic
// engram a_t, or the semantic embedding a-bar.
struct Segments {
  Vector sub;
  Vector pred;
  Vector obj;

  static Segments zeros(Eigen::Index d) {
    return {Vector::Zero(d), Vector::Zero(d), Vector::Zero(d)};
  }

  bool operator==(const Segments& other) const {
    return sub == other.sub && pred == other.pred && obj == other.obj;
  }
};

struct ModelParams {
  ModelDims dims;
  bool use_skip = false;
  bool tie_weights = true;

  Matrix A;     // d_q x (N_E + N_P); concept columns first, then predicates
  Matrix A_in;  // index -> representation when untied; empty when tied
  Matrix D;     // d_q x d_g
  Matrix V;     // d_h x d_q
  Matrix W;     // d_q x d_h
  Matrix B;     // d_h x d_h
  Segments a_bar;
  Segments a_bar_bg;
  std::map<std::uint64_t, Segments> episodic;

  [[nodiscard]] Eigen::Index num_concepts() const { return dims.num_concepts; }
  [[nodiscard]] Eigen::Index num_predicates() const { return dims.num_predicates; }

  // Representation -> index direction (logits are columns' dot products with q).
  [[nodiscard]] auto concept_out() const { return A.leftCols(dims.num_concepts); }
  [[nodiscard]] auto predicate_out() const { return A.rightCols(dims.num_predicates); }

  // Index -> representation direction.
  [[nodiscard]] const Matrix& input_embeddings() const { return tie_weights ? A : A_in; }
  [[nodiscard]] Vector concept_embedding(Eigen::Index s) const {
    return input_embeddings().col(s);
  }
  [[nodiscard]] Vector predicate_embedding(Eigen::Index p) const {
    return input_embeddings().col(dims.num_concepts + p);
  }

  void check_shapes() const {
    const auto n = static_cast<Eigen::Index>(dims.num_concepts + dims.num_predicates);
    auto expect = [](const Matrix& m, Eigen::Index r, Eigen::Index c, const char* name) {
      if (m.rows() != r || m.cols() != c) {
        fail(ErrorCode::kShape, std::string("matrix ") + name + " has shape " +
                                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                    ", expected " + std::to_string(r) + "x" + std::to_string(c));
      }
    };
    expect(A, dims.d_q, n, "A");
    if (!tie_weights) expect(A_in, dims.d_q, n, "A_in");
    expect(D, dims.d_q, dims.d_g, "D");
    expect(V, dims.d_h, dims.d_q, "V");
    expect(W, dims.d_q, dims.d_h, "W");
    expect(B, dims.d_h, dims.d_h, "B");
    auto expect_seg = [&](const Segments& s, const char* name) {
      if (s.sub.size() != dims.d_q || s.pred.size() != dims.d_q || s.obj.size() != dims.d_q) {
        fail(ErrorCode::kShape, std::string("segments ") + name + " must have length d_q");
      }
    };
    expect_seg(a_bar, "a_bar");
    expect_seg(a_bar_bg, "a_bar_bg");
    for (const auto& [t, seg] : episodic) expect_seg(seg, "episode");
  }

  bool operator==(const ModelParams& other) const {
    return dims == other.dims && use_skip == other.use_skip &&
           tie_weights == other.tie_weights && A == other.A &&
           (tie_weights || A_in == other.A_in) && D == other.D && V == other.V &&
           W == other.W && B == other.B && a_bar == other.a_bar &&
           a_bar_bg == other.a_bar_bg && episodic == other.episodic;
  }
};

struct InitOptions {
  bool use_skip = false;
  bool tie_weights = true;
  double scale = 0.1;  // stddev = scale / sqrt(fan_in)
};

// Gaussian init with stddev scale/sqrt(fan-in); a-bar segments start at zero.
inline ModelParams init_params(const ModelDims& dims, std::uint64_t seed,
                               const InitOptions& options = {}) {
  Rng rng(derive_seed(seed, "init"));
  auto gaussian = [&rng, &options](Eigen::Index rows, Eigen::Index cols, double fan_in) {
    Matrix m(rows, cols);
    const double sd = options.scale / std::sqrt(fan_in);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = sd * rng.normal();
    return m;
  };
  ModelParams p;
  p.dims = dims;
  p.use_skip = options.use_skip;
  p.tie_weights = options.tie_weights;
  const Eigen::Index n = dims.num_concepts + dims.num_predicates;
  p.A = gaussian(dims.d_q, n, dims.d_q);
  if (!p.tie_weights) p.A_in = gaussian(dims.d_q, n, dims.d_q);
  p.D = gaussian(dims.d_q, dims.d_g, dims.d_g);
  p.V = gaussian(dims.d_h, dims.d_q, dims.d_q);
  p.W = gaussian(dims.d_q, dims.d_h, dims.d_h);
  p.B = gaussian(dims.d_h, dims.d_h, dims.d_h);
  p.a_bar = Segments::zeros(dims.d_q);
  p.a_bar_bg = Segments::zeros(dims.d_q);
  return p;
}

// --- TBRAIN1 persistence ----------------------------------------------------
//
// "TBRAIN1", then little-endian u32: N_E, N_P, d_g, d_q, d_h, flags,
// episode count; then A, D, V, W, B, a_bar (3 x d_q: sub, pred, obj),
// a_bar_bg, row-major IEEE-754 binary64; A_in follows when untied; then per
// episode a u64 time index and its three segments.

inline constexpr char kModelMagic[] = "TBRAIN1";
inline constexpr std::uint32_t kFlagSkip = 1U << 0;
inline constexpr std::uint32_t kFlagTied = 1U << 1;

namespace detail {

template <typename UInt>
void write_le(std::ostream& out, UInt value) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes, sizeof(UInt));
}

template <typename UInt>
UInt read_le(std::istream& in, const char* field) {
  unsigned char bytes[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) {
    fail(ErrorCode::kParse, std::string("model file truncated at ") + field);
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
  return value;
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      write_le(out, std::bit_cast<std::uint64_t>(m(i, j)));
}

inline Matrix read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols,
                          const char* field) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = std::bit_cast<double>(read_le<std::uint64_t>(in, field));
  return m;
}

inline void write_segments(std::ostream& out, const Segments& s) {
  for (const Vector* v : {&s.sub, &s.pred, &s.obj})
    for (Eigen::Index i = 0; i < v->size(); ++i)
      write_le(out, std::bit_cast<std::uint64_t>((*v)[i]));
}

inline Segments read_segments(std::istream& in, Eigen::Index d, const char* field) {
  Segments s;
  for (Vector* v : {&s.sub, &s.pred, &s.obj}) {
    v->resize(d);
    for (Eigen::Index i = 0; i < d; ++i) (*v)[i] = std::bit_cast<double>(read_le<std::uint64_t>(in, field));
  }
  return s;
}

}  // namespace detail

inline void save_model(std::ostream& out, const ModelParams& p) {
  p.check_shapes();
  out.write(kModelMagic, sizeof(kModelMagic) - 1);
  const auto& d = p.dims;
  const std::uint32_t flags = (p.use_skip ? kFlagSkip : 0U) | (p.tie_weights ? kFlagTied : 0U);
  for (std::uint32_t v : {d.num_concepts, d.num_predicates, d.d_g, d.d_q, d.d_h, flags,
                          static_cast<std::uint32_t>(p.episodic.size())}) {
    detail::write_le(out, v);
  }
  for (const Matrix* m : {&p.A, &p.D, &p.V, &p.W, &p.B}) detail::write_matrix(out, *m);
  detail::write_segments(out, p.a_bar);
  detail::write_segments(out, p.a_bar_bg);
  if (!p.tie_weights) detail::write_matrix(out, p.A_in);
  for (const auto& [t, seg] : p.episodic) {
    detail::write_le(out, static_cast<std::uint64_t>(t));
    detail::write_segments(out, seg);
  }
}

inline ModelParams load_model(std::istream& in) {
  char magic[sizeof(kModelMagic) - 1] = {};
  if (!in.read(magic, sizeof(magic)) || std::string(magic, sizeof(magic)) != kModelMagic) {
    fail(ErrorCode::kParse, "model file: bad magic, expected TBRAIN1");
  }
  ModelParams p;
  p.dims.num_concepts = detail::read_le<std::uint32_t>(in, "N_E");
  p.dims.num_predicates = detail::read_le<std::uint32_t>(in, "N_P");
  p.dims.d_g = detail::read_le<std::uint32_t>(in, "d_g");
  p.dims.d_q = detail::read_le<std::uint32_t>(in, "d_q");
  p.dims.d_h = detail::read_le<std::uint32_t>(in, "d_h");
  const auto flags = detail::read_le<std::uint32_t>(in, "flags");
  const auto episodes = detail::read_le<std::uint32_t>(in, "episode count");
  if ((flags & ~(kFlagSkip | kFlagTied)) != 0) {
    fail(ErrorCode::kParse, "model file: unknown flag bits in field flags");
  }
  if (p.dims.num_concepts == 0 || p.dims.num_predicates == 0 || p.dims.d_q == 0 ||
      p.dims.d_h == 0 || p.dims.d_g == 0) {
    fail(ErrorCode::kParse, "model file: zero dimension in header");
  }
  p.use_skip = (flags & kFlagSkip) != 0;
  p.tie_weights = (flags & kFlagTied) != 0;
  const auto& d = p.dims;
  const Eigen::Index n = d.num_concepts + d.num_predicates;
  p.A = detail::read_matrix(in, d.d_q, n, "A");
  p.D = detail::read_matrix(in, d.d_q, d.d_g, "D");
  p.V = detail::read_matrix(in, d.d_h, d.d_q, "V");
  p.W = detail::read_matrix(in, d.d_q, d.d_h, "W");
  p.B = detail::read_matrix(in, d.d_h, d.d_h, "B");
  p.a_bar = detail::read_segments(in, d.d_q, "a_bar");
  p.a_bar_bg = detail::read_segments(in, d.d_q, "a_bar_bg");
  if (!p.tie_weights) p.A_in = detail::read_matrix(in, d.d_q, n, "A_in");
  for (std::uint32_t e = 0; e < episodes; ++e) {
    const auto t = detail::read_le<std::uint64_t>(in, "episode time");
    if (!p.episodic.emplace(t, detail::read_segments(in, d.d_q, "episode")).second) {
      fail(ErrorCode::kParse, "model file: duplicate episode time " + std::to_string(t));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorCode::kParse, "model file: trailing bytes after last episode");
  }
  return p;
}

inline void save_model_file(const std::string& path, const ModelParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  save_model(out, p);
  if (!out) fail(ErrorCode::kIo, "write to '" + path + "' failed");
}

inline ModelParams load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open model file '" + path + "'");
  try {
    return load_model(in);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParse) fail(ErrorCode::kParse, path + ": " + e.what());
    throw;
  }
}

}  // namespace tbrain
