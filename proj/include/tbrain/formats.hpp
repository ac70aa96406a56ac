#pragma once

// Text formats: vocabulary, triple and temporal-triple TSV (names, not indices),
// scene label TSV and the TB-FEAT feature file. Every writer emits shortest
// round-trip decimals, so write -> read -> write is byte-identical.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tbrain/error.hpp"
#include "tbrain/kg.hpp"
#include "tbrain/linalg.hpp"
#include "tbrain/sensory.hpp"

namespace tbrain {

// Location for parse diagnostics: "file:line: field <name>: message".
struct SourcePos {
  std::string file;
  std::size_t line = 0;

  [[noreturn]] void error(std::string_view field, const std::string& message) const {
    fail(ErrorCode::kParse, file + ":" + std::to_string(line) + ": field " + std::string(field) +
                                ": " + message);
  }
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

inline double parse_double(std::string_view text, const SourcePos& pos, std::string_view field) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    pos.error(field, "expected a decimal number, got '" + std::string(text) + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(std::string_view text, const SourcePos& pos, std::string_view field) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    pos.error(field, "expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

// Calls fn(fields, pos) for every non-empty, non-comment line.
template <typename Fn>
void for_each_record(std::istream& in, const std::string& file, Fn&& fn) {
  std::string line;
  SourcePos pos{file, 0};
  while (std::getline(in, line)) {
    ++pos.line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    fn(split(line, '\t'), pos);
  }
}

inline void expect_fields(const std::vector<std::string_view>& fields, std::size_t n,
                          const SourcePos& pos, std::string_view what) {
  if (fields.size() != n) {
    pos.error(what, "expected " + std::to_string(n) + " tab-separated fields, got " +
                        std::to_string(fields.size()));
  }
}

inline Index lookup_concept(const Vocabulary& vocab, std::string_view name, const SourcePos& pos,
                            std::string_view field) {
  if (auto id = vocab.find_concept(std::string(name))) return *id;
  pos.error(field, "unknown concept '" + std::string(name) + "'");
}

inline Index lookup_predicate(const Vocabulary& vocab, std::string_view name, const SourcePos& pos,
                              std::string_view field) {
  if (auto id = vocab.find_predicate(std::string(name))) return *id;
  pos.error(field, "unknown predicate '" + std::string(name) + "'");
}

}  // namespace detail

// --- vocabulary ----------------------------------------------------------------
// concept \t <name> \t <kind>   |   predicate \t <name>

inline void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (Index i = 0; i < vocab.num_concepts(); ++i)
    out << "concept\t" << vocab.concept_name(i) << '\t' << to_string(vocab.concept_kind(i)) << '\n';
  for (Index i = 0; i < vocab.num_predicates(); ++i) out << "predicate\t" << vocab.predicate_name(i) << '\n';
}

inline Vocabulary read_vocabulary(std::istream& in, const std::string& file) {
  Vocabulary vocab;
  detail::for_each_record(in, file, [&](const auto& f, const SourcePos& pos) {
    if (f[0] == "concept") {
      detail::expect_fields(f, 3, pos, "concept");
      ConceptKind kind{};
      try {
        kind = concept_kind_from_string(f[2]);
      } catch (const Error& e) {
        pos.error("kind", e.what());
      }
      if (vocab.find_concept(std::string(f[1]))) pos.error("name", "duplicate concept");
      vocab.add_concept(std::string(f[1]), kind);
    } else if (f[0] == "predicate") {
      detail::expect_fields(f, 2, pos, "predicate");
      if (vocab.find_predicate(std::string(f[1]))) pos.error("name", "duplicate predicate");
      vocab.add_predicate(std::string(f[1]));
    } else {
      pos.error("record", "expected 'concept' or 'predicate', got '" + std::string(f[0]) + "'");
    }
  });
  if (vocab.num_concepts() == 0 || vocab.num_predicates() == 0) {
    fail(ErrorCode::kParse, file + ": vocabulary needs at least one concept and one predicate");
  }
  return vocab;
}

// --- triples ---------------------------------------------------------------------

inline void write_triples(std::ostream& out, const std::set<Triple>& triples, const Vocabulary& vocab) {
  for (const auto& t : triples) {
    out << vocab.concept_name(t.s) << '\t' << vocab.predicate_name(t.p) << '\t'
        << vocab.concept_name(t.o) << '\n';
  }
}

inline std::vector<Triple> read_triples(std::istream& in, const std::string& file,
                                        const Vocabulary& vocab) {
  std::vector<Triple> out;
  detail::for_each_record(in, file, [&](const auto& f, const SourcePos& pos) {
    detail::expect_fields(f, 3, pos, "triple");
    out.push_back({detail::lookup_concept(vocab, f[0], pos, "s"),
                   detail::lookup_predicate(vocab, f[1], pos, "p"),
                   detail::lookup_concept(vocab, f[2], pos, "o")});
  });
  return out;
}

// "# N_T=<n>" header keeps trailing empty time steps; then s \t p \t o \t t.
inline void write_temporal(std::ostream& out, const TemporalKG& tkg, const Vocabulary& vocab) {
  out << "# N_T=" << tkg.num_times() << '\n';
  for (std::size_t t = 0; t < tkg.num_times(); ++t) {
    for (const auto& triple : tkg.at(t)) {
      out << vocab.concept_name(triple.s) << '\t' << vocab.predicate_name(triple.p) << '\t'
          << vocab.concept_name(triple.o) << '\t' << t << '\n';
    }
  }
}

inline TemporalKG read_temporal(std::istream& in, const std::string& file, const Vocabulary& vocab) {
  std::string first;
  std::getline(in, first);
  if (!first.starts_with("# N_T=")) {
    fail(ErrorCode::kParse, file + ":1: field N_T: expected '# N_T=<count>' header");
  }
  const SourcePos header{file, 1};
  const auto n = detail::parse_uint(std::string_view(first).substr(6), header, "N_T");
  TemporalKG tkg(KgShape::of(vocab), n);
  std::string line;
  SourcePos pos{file, 1};
  while (std::getline(in, line)) {
    ++pos.line;
    if (line.empty() || line.front() == '#') continue;
    const auto f = detail::split(line, '\t');
    detail::expect_fields(f, 4, pos, "temporal triple");
    const Triple triple{detail::lookup_concept(vocab, f[0], pos, "s"),
                        detail::lookup_predicate(vocab, f[1], pos, "p"),
                        detail::lookup_concept(vocab, f[2], pos, "o")};
    const auto t = detail::parse_uint(f[3], pos, "t");
    if (t >= n) pos.error("t", "time index " + std::to_string(t) + " >= N_T " + std::to_string(n));
    tkg.insert(triple, t);
  }
  return tkg;
}

// --- scenes ----------------------------------------------------------------------
// t \t split \t sub_labels \t predicates \t obj_labels   (labels comma-separated)

enum class Split { kTrain, kTest };

namespace detail {

inline std::string join_concepts(const std::set<Index>& ids, const Vocabulary& vocab) {
  std::string out;
  for (Index id : ids) {
    if (!out.empty()) out += ',';
    out += vocab.concept_name(id);
  }
  return out;
}

inline std::string join_predicates(const std::set<Index>& ids, const Vocabulary& vocab) {
  std::string out;
  for (Index id : ids) {
    if (!out.empty()) out += ',';
    out += vocab.predicate_name(id);
  }
  return out;
}

}  // namespace detail

struct SceneSet {
  std::vector<Scene> train;
  std::vector<Scene> test;
};

inline void write_scene_labels(std::ostream& out, const SceneSet& scenes, const Vocabulary& vocab) {
  for (const auto* list : {&scenes.train, &scenes.test}) {
    const char* split = list == &scenes.train ? "train" : "test";
    for (const auto& s : *list) {
      out << s.t << '\t' << split << '\t' << detail::join_concepts(s.sub_labels, vocab) << '\t'
          << detail::join_predicates(s.predicates, vocab) << '\t'
          << detail::join_concepts(s.obj_labels, vocab) << '\n';
    }
  }
}

inline SceneSet read_scene_labels(std::istream& in, const std::string& file, const Vocabulary& vocab) {
  SceneSet out;
  detail::for_each_record(in, file, [&](const auto& f, const SourcePos& pos) {
    detail::expect_fields(f, 5, pos, "scene");
    Scene s;
    s.t = detail::parse_uint(f[0], pos, "t");
    for (auto name : detail::split(f[2], ','))
      s.sub_labels.insert(detail::lookup_concept(vocab, name, pos, "sub_labels"));
    for (auto name : detail::split(f[3], ','))
      s.predicates.insert(detail::lookup_predicate(vocab, name, pos, "predicates"));
    for (auto name : detail::split(f[4], ','))
      s.obj_labels.insert(detail::lookup_concept(vocab, name, pos, "obj_labels"));
    if (f[1] == "train") {
      out.train.push_back(std::move(s));
    } else if (f[1] == "test") {
      out.test.push_back(std::move(s));
    } else {
      pos.error("split", "expected 'train' or 'test', got '" + std::string(f[1]) + "'");
    }
  });
  return out;
}

// --- TB-FEAT ---------------------------------------------------------------------
// TB-FEAT 1 <d_g>
// <scene_id> \t <sub|pred|obj> \t v1 ... v_dg

inline std::string_view to_string(BoxRole role) {
  switch (role) {
    case BoxRole::kSub: return "sub";
    case BoxRole::kPred: return "pred";
    case BoxRole::kObj: return "obj";
  }
  return "sub";
}

struct FeatureRecord {
  std::uint64_t scene_id = 0;
  BoxRole role = BoxRole::kSub;
  FeatureVector values;

  bool operator==(const FeatureRecord&) const = default;
};

inline void write_features(std::ostream& out, std::span<const FeatureRecord> records,
                           std::size_t dim) {
  out << "TB-FEAT 1 " << dim << '\n';
  for (const auto& r : records) {
    if (static_cast<std::size_t>(r.values.size()) != dim) {
      fail(ErrorCode::kShape, "feature record dimension differs from header");
    }
    out << r.scene_id << '\t' << to_string(r.role);
    for (Eigen::Index i = 0; i < r.values.size(); ++i) out << '\t' << detail::format_double(r.values[i]);
    out << '\n';
  }
}

inline std::vector<FeatureRecord> read_features(std::istream& in, const std::string& file,
                                                std::size_t* dim_out = nullptr) {
  std::string header;
  if (!std::getline(in, header)) fail(ErrorCode::kParse, file + ":1: field header: empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto h = detail::split(header, ' ');
  const SourcePos hpos{file, 1};
  if (h.size() != 3 || h[0] != "TB-FEAT") hpos.error("header", "expected 'TB-FEAT 1 <d_g>'");
  if (h[1] != "1") hpos.error("version", "unsupported version '" + std::string(h[1]) + "'");
  const auto dim = detail::parse_uint(h[2], hpos, "d_g");
  if (dim == 0) hpos.error("d_g", "dimension must be positive");
  if (dim_out != nullptr) *dim_out = dim;

  std::vector<FeatureRecord> out;
  std::string line;
  SourcePos pos{file, 1};
  while (std::getline(in, line)) {
    ++pos.line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split(line, '\t');
    detail::expect_fields(f, dim + 2, pos, "record");
    FeatureRecord r;
    r.scene_id = detail::parse_uint(f[0], pos, "scene_id");
    if (f[1] == "sub") {
      r.role = BoxRole::kSub;
    } else if (f[1] == "pred") {
      r.role = BoxRole::kPred;
    } else if (f[1] == "obj") {
      r.role = BoxRole::kObj;
    } else {
      pos.error("role", "expected sub|pred|obj, got '" + std::string(f[1]) + "'");
    }
    r.values.resize(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      r.values[static_cast<Eigen::Index>(i)] =
          detail::parse_double(f[i + 2], pos, "v" + std::to_string(i + 1));
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<FeatureRecord> scene_feature_records(std::span<const Scene> scenes) {
  std::vector<FeatureRecord> out;
  for (const auto& s : scenes) {
    out.push_back({s.t, BoxRole::kSub, s.g_sub});
    out.push_back({s.t, BoxRole::kPred, s.g_pred});
    out.push_back({s.t, BoxRole::kObj, s.g_obj});
  }
  return out;
}

// Fills g_sub/g_pred/g_obj of scenes from records keyed by scene id (= t).
inline void attach_features(std::vector<Scene>& scenes, std::span<const FeatureRecord> records,
                            const std::string& file) {
  std::map<std::uint64_t, Scene*> by_id;
  for (auto& s : scenes) by_id[s.t] = &s;
  for (const auto& r : records) {
    auto it = by_id.find(r.scene_id);
    if (it == by_id.end()) continue;
    Scene& s = *it->second;
    (r.role == BoxRole::kSub ? s.g_sub : r.role == BoxRole::kPred ? s.g_pred : s.g_obj) = r.values;
  }
  for (const auto& s : scenes) {
    if (s.g_sub.size() == 0 || s.g_pred.size() == 0 || s.g_obj.size() == 0) {
      fail(ErrorCode::kParse, file + ": scene " + std::to_string(s.t) + " is missing a feature record");
    }
  }
}

// --- file helpers ------------------------------------------------------------------

template <typename Fn>
auto with_input_file(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return fn(in);
}

template <typename Fn>
void with_output_file(const std::string& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  fn(out);
  if (!out) fail(ErrorCode::kIo, "write to '" + path + "' failed");
}

}  // namespace tbrain
