// tbrain: command-line front end for world generation, training, decoding,
// memory recall and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "tbrain/tbrain.hpp"

namespace fs = std::filesystem;
using namespace tbrain;

namespace {

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingEngram: return 2;
    case ErrorCode::kParse: return 3;
    case ErrorCode::kConfig: return 4;
    case ErrorCode::kIo: return 5;
    default: return 1;
  }
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::kIo, "sha256 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string read_file(const std::string& path) {
  return with_input_file(path, [](std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  });
}

Json read_json(const std::string& path) {
  return with_input_file(path, [&](std::istream& in) {
    try {
      return Json::parse(in);
    } catch (const Json::parse_error& e) {
      fail(ErrorCode::kParse, path + ": " + e.what());
    }
  });
}

void print_triple(std::ostream& out, const Triple& t, const Vocabulary& v) {
  out << v.concept_name(t.s) << '\t' << v.predicate_name(t.p) << '\t' << v.concept_name(t.o) << '\n';
}

void check_vocab_matches(const ModelParams& p, const World& w) {
  if (p.dims.num_concepts != w.vocab.num_concepts() || p.dims.num_predicates != w.vocab.num_predicates()) {
    fail(ErrorCode::kShape, "model index spaces do not match the world vocabulary");
  }
}

const Scene& find_scene(const World& w, std::uint64_t t) {
  for (const auto* list : {&w.train, &w.test})
    for (const auto& s : *list)
      if (s.t == t) return s;
  fail(ErrorCode::kInvalidIndex, "no scene with id " + std::to_string(t));
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (auto part : detail::split(text, ',')) {
    const SourcePos pos{"--k", 0};
    const auto k = detail::parse_uint(part, pos, "k");
    if (k == 0) fail(ErrorCode::kConfig, "k must be >= 1");
    out.push_back(k);
  }
  return out;
}

// --- subcommands ---------------------------------------------------------------

struct GenWorldArgs {
  std::string out;
  std::string config;
  std::uint64_t seed = 0;
  bool force = false;
};

void cmd_gen_world(const GenWorldArgs& a) {
  WorldConfig cfg;
  if (!a.config.empty()) cfg = world_config_from_json(read_json(a.config));
  cfg.seed = a.seed;
  cfg.validate();
  if (fs::exists(a.out)) {
    if (!a.force) fail(ErrorCode::kOverwriteRefused, "output directory '" + a.out + "' exists (use --force)");
    for (const char* name : kWorldFiles) fs::remove(fs::path(a.out) / name);
  }
  save_world_dir(generate_world(cfg), a.out);
}

struct TrainArgs {
  std::string world;
  std::string out;
  std::string config;
  std::string init;
  std::string log;
  std::uint64_t seed = 0;
};

void cmd_train(const TrainArgs& a) {
  RunConfig rc;
  if (!a.config.empty()) rc = run_config_from_json(read_json(a.config));
  rc.train.seed = a.seed;
  const World w = load_world_dir(a.world);

  ModelParams params;
  if (!a.init.empty()) {
    params = load_model_file(a.init);
    check_vocab_matches(params, w);
  } else {
    const ModelDims dims{static_cast<std::uint32_t>(w.vocab.num_concepts()),
                         static_cast<std::uint32_t>(w.vocab.num_predicates()), w.config.feature_dim,
                         rc.d_q, rc.d_h};
    params = init_params(dims, derive_seed(a.seed, "init"), rc.init);
  }

  const auto n_heldout = static_cast<std::size_t>(rc.heldout_fraction * static_cast<double>(w.train.size()));
  const std::span<const Scene> all(w.train);
  const auto train = all.first(all.size() - n_heldout);
  const auto heldout = all.last(n_heldout);

  std::ofstream log_file;
  if (!a.log.empty()) {
    log_file.open(a.log, std::ios::binary);
    if (!log_file) fail(ErrorCode::kIo, "cannot open '" + a.log + "' for writing");
  }
  std::ostream& log = a.log.empty() ? std::cout : log_file;
  log << "epoch\tmode\tmean_cost\theldout_cost\n";
  auto on_epoch = [&](const EpochRecord& r) { log << format_epoch(r) << '\n' << std::flush; };

  switch (rc.train.mode) {
    case TrainMode::kSupervised: train_supervised(params, train, heldout, rc.train, on_epoch); break;
    case TrainMode::kSelfSupervised: train_self_supervised(params, train, heldout, rc.train, on_epoch); break;
    case TrainMode::kSemantic:
    case TrainMode::kSemanticReplay: {
      auto triples_of = [](std::span<const Scene> scenes) {
        std::vector<Triple> out;
        for (const auto& s : scenes)
          for (const auto& t : s.triples()) out.push_back(t);
        return out;
      };
      const auto stream = triples_of(train);
      const auto held = triples_of(heldout);
      train_semantic(params, stream, held, rc.train, on_epoch);
      break;
    }
  }
  if (rc.store_episodes) {
    for (const auto& s : w.train)
      if (!params.episodic.contains(s.t)) store_episode(s, params);
  }
  save_model_file(a.out, params);
}

struct DecodeArgs {
  std::string world;
  std::string model;
  std::string split = "test";
  std::optional<std::uint64_t> scene;
  std::size_t n = 30;
  bool greedy = false;
  std::uint64_t seed = 0;
};

// t \t s \t p \t o  per deduplicated decoded triple
void cmd_decode(const DecodeArgs& a) {
  const World w = load_world_dir(a.world);
  const ModelParams params = load_model_file(a.model);
  check_vocab_matches(params, w);
  const auto mode = a.greedy ? DecodeMode::kGreedy : DecodeMode::kSample;
  std::vector<const Scene*> scenes;
  if (a.scene) {
    scenes.push_back(&find_scene(w, *a.scene));
  } else {
    if (a.split != "train" && a.split != "test") fail(ErrorCode::kConfig, "--split must be train or test");
    for (const auto& s : a.split == "train" ? w.train : w.test) scenes.push_back(&s);
  }
  for (const Scene* s : scenes) {
    Rng rng(derive_seed(a.seed, s->t));
    for (const auto& t : decode_scene(*s, params, a.n, mode, rng).facts) {
      std::cout << s->t << '\t';
      print_triple(std::cout, t, w.vocab);
    }
  }
}

struct SampleArgs {
  std::string world;
  std::string model;
  std::string source = "semantic";
  std::string fix_subject;
  std::size_t n = 1;
  std::uint64_t seed = 0;
};

void cmd_sample(const SampleArgs& a) {
  const World w = load_world_dir(a.world);
  const ModelParams params = load_model_file(a.model);
  check_vocab_matches(params, w);
  SemanticSource source{};
  if (a.source == "semantic") {
    source = SemanticSource::kPerceptual;
  } else if (a.source == "background") {
    source = SemanticSource::kBackground;
  } else {
    fail(ErrorCode::kConfig, "--source must be semantic or background");
  }
  std::optional<Index> subject;
  if (!a.fix_subject.empty()) subject = w.vocab.concept_id(a.fix_subject);
  Rng rng(derive_seed(a.seed, "sample"));
  for (std::size_t i = 0; i < a.n; ++i) print_triple(std::cout, sample_semantic(params, source, subject, rng), w.vocab);
}

struct RecallArgs {
  std::string world;
  std::string model;
  std::uint64_t time = 0;
  std::size_t n = 1;
  bool greedy = false;
  std::uint64_t seed = 0;
};

void cmd_recall(const RecallArgs& a) {
  const World w = load_world_dir(a.world);
  const ModelParams params = load_model_file(a.model);
  check_vocab_matches(params, w);
  Rng rng(derive_seed(a.seed, a.time));
  const auto mode = a.greedy ? DecodeMode::kGreedy : DecodeMode::kSample;
  for (const auto& t : recall_episodic(a.time, params, mode, rng, a.n).facts) print_triple(std::cout, t, w.vocab);
}

struct ConsolidateArgs {
  std::string model;
  std::string out;
};

void cmd_consolidate(const ConsolidateArgs& a) {
  ModelParams params = load_model_file(a.model);
  consolidate_semantic(params);
  save_model_file(a.out, params);
}

struct EvalArgs {
  std::string world;
  std::string model;
  std::string task = "predicate";
  std::string k = "1";
  std::string split = "test";
  std::string ablation = "none";
  std::size_t beam = 10;
  std::string out;
  std::string manifest;
  std::uint64_t seed = 0;
};

// task \t k \t recall, plus a JSON manifest with the config hash, seed and
// model digest.
void cmd_eval(const EvalArgs& a) {
  const World w = load_world_dir(a.world);
  const std::string model_bytes = read_file(a.model);
  const ModelParams loaded = load_model_file(a.model);
  check_vocab_matches(loaded, w);
  const auto ks = parse_k_list(a.k);
  if (a.ablation != "none" && a.ablation != "dir") fail(ErrorCode::kConfig, "--ablation must be none or dir");
  const ModelParams params = a.ablation == "dir" ? without_working_memory(loaded) : loaded;
  const EvalOptions opts{a.beam};

  std::vector<std::pair<std::size_t, double>> rows;
  for (std::size_t k : ks) {
    double r = 0.0;
    if (a.task == "semantic" || a.task == "semantic-background") {
      const auto src = a.task == "semantic" ? SemanticSource::kPerceptual : SemanticSource::kBackground;
      r = semantic_recall(params, a.split == "train" ? w.train : w.test, k, src);
    } else {
      Task task{};
      if (a.task == "subject") {
        task = Task::kSubject;
      } else if (a.task == "predicate") {
        task = Task::kPredicate;
      } else if (a.task == "phrase") {
        task = Task::kPhrase;
      } else {
        fail(ErrorCode::kConfig, "unknown task '" + a.task + "'");
      }
      if (a.split == "zero-shot") {
        r = zero_shot_eval(params, w.test, w.zero_shot, k, task, opts);
      } else if (a.split == "train" || a.split == "test") {
        r = evaluate_task(params, a.split == "train" ? w.train : w.test, task, k, opts);
      } else {
        fail(ErrorCode::kConfig, "--split must be train, test or zero-shot");
      }
    }
    rows.emplace_back(k, r);
  }

  const Json config{{"task", a.task},         {"k", ks},
                    {"split", a.split},       {"ablation", a.ablation},
                    {"beam", a.beam},         {"world", to_json(w.config)}};
  std::ostringstream results;
  results.precision(17);
  results << "task\tk\trecall\n";
  for (const auto& [k, r] : rows) results << a.task << '\t' << k << '\t' << r << '\n';

  const Json manifest{{"config", config},
                      {"config_sha256", sha256_hex(config.dump())},
                      {"seed", a.seed},
                      {"model_sha256", sha256_hex(model_bytes)}};
  if (a.out.empty()) {
    std::cout << results.str();
  } else {
    with_output_file(a.out, [&](std::ostream& o) { o << results.str(); });
  }
  const std::string manifest_path = !a.manifest.empty() ? a.manifest : a.out.empty() ? "" : a.out + ".manifest.json";
  if (manifest_path.empty()) {
    std::cerr << manifest.dump() << '\n';
  } else {
    with_output_file(manifest_path, [&](std::ostream& o) { o << manifest.dump(2) << '\n'; });
  }
}

void cmd_inspect(const std::string& model) {
  const ModelParams p = load_model_file(model);
  std::cout << "format\t" << kModelMagic << '\n'
            << "num_concepts\t" << p.dims.num_concepts << '\n'
            << "num_predicates\t" << p.dims.num_predicates << '\n'
            << "d_g\t" << p.dims.d_g << '\n'
            << "d_q\t" << p.dims.d_q << '\n'
            << "d_h\t" << p.dims.d_h << '\n'
            << "use_skip\t" << p.use_skip << '\n'
            << "tie_weights\t" << p.tie_weights << '\n'
            << "episodes\t" << p.episodic.size() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-brain knowledge graph perception and memory toolkit"};
  app.require_subcommand(1);

  GenWorldArgs gw;
  auto* gen = app.add_subcommand("gen-world", "Generate a synthetic scene world");
  gen->add_option("--out", gw.out, "Output directory")->required();
  gen->add_option("--config", gw.config, "World config JSON");
  gen->add_option("--seed", gw.seed, "64-bit seed")->required();
  gen->add_flag("--force", gw.force, "Overwrite an existing directory");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--world", tr.world, "World directory")->required();
  train->add_option("--out", tr.out, "Output TBRAIN1 model")->required();
  train->add_option("--config", tr.config, "Train config JSON");
  train->add_option("--init", tr.init, "Start from this model");
  train->add_option("--log", tr.log, "Training log TSV (default stdout)");
  train->add_option("--seed", tr.seed, "64-bit seed")->required();

  DecodeArgs de;
  auto* decode = app.add_subcommand("decode", "Decode scenes into triples");
  decode->add_option("--world", de.world)->required();
  decode->add_option("--model", de.model)->required();
  decode->add_option("--split", de.split, "train|test");
  decode->add_option("--scene", de.scene, "Single scene id");
  decode->add_option("-n", de.n, "Samples per scene");
  decode->add_flag("--greedy", de.greedy);
  decode->add_option("--seed", de.seed)->required();

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Sample triples from semantic memory");
  sample->add_option("--world", sa.world)->required();
  sample->add_option("--model", sa.model)->required();
  sample->add_option("--source", sa.source, "semantic|background");
  sample->add_option("--fix-subject", sa.fix_subject, "Condition on this subject name");
  sample->add_option("-n", sa.n, "Number of samples");
  sample->add_option("--seed", sa.seed)->required();

  RecallArgs re;
  auto* recall = app.add_subcommand("recall", "Replay an episodic engram");
  recall->add_option("--world", re.world)->required();
  recall->add_option("--model", re.model)->required();
  recall->add_option("--time", re.time)->required();
  recall->add_option("-n", re.n, "Samples");
  recall->add_flag("--greedy", re.greedy);
  recall->add_option("--seed", re.seed)->required();

  ConsolidateArgs co;
  auto* consolidate = app.add_subcommand("consolidate", "Set semantic memory to the mean engram");
  consolidate->add_option("--model", co.model)->required();
  consolidate->add_option("--out", co.out)->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Recall@K evaluation");
  eval->add_option("--world", ev.world)->required();
  eval->add_option("--model", ev.model)->required();
  eval->add_option("--task", ev.task, "subject|predicate|phrase|semantic|semantic-background");
  eval->add_option("--k", ev.k, "Comma-separated K values");
  eval->add_option("--split", ev.split, "train|test|zero-shot");
  eval->add_option("--ablation", ev.ablation, "none|dir");
  eval->add_option("--beam", ev.beam);
  eval->add_option("--out", ev.out, "Results TSV (default stdout)");
  eval->add_option("--manifest", ev.manifest, "Manifest JSON (default <out>.manifest.json)");
  eval->add_option("--seed", ev.seed)->required();

  std::string inspect_model;
  auto* inspect = app.add_subcommand("inspect", "Dump a model header");
  inspect->add_option("--model", inspect_model)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error\tusage\t" << msg << '\n';
    return 64;
  }

  try {
    if (*gen) cmd_gen_world(gw);
    if (*train) cmd_train(tr);
    if (*decode) cmd_decode(de);
    if (*sample) cmd_sample(sa);
    if (*recall) cmd_recall(re);
    if (*consolidate) cmd_consolidate(co);
    if (*eval) cmd_eval(ev);
    if (*inspect) cmd_inspect(inspect_model);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error\t" << to_string(e.code()) << '\t' << msg << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error\tinternal\t" << e.what() << '\n';
    return 1;
  }
  return 0;
}
