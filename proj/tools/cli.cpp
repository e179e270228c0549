#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "ictd/report.hpp"
#include "ictd/serialize.hpp"
#include "ictd/training.hpp"
#include "ictd/verify.hpp"

#ifndef ICTD_CODE_VERSION
#define ICTD_CODE_VERSION "unknown"
#endif

namespace ictd::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kEquivalenceTolerance = 1e-8;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Option documents. Each command's settings live in a flat JSON object with
// fixed keys; config files and manifests use the same object.

template <typename Options>
struct Field {
  std::function<Json(const Options&)> write;
  std::function<void(Options&, const Json&)> read;
};

template <typename Options, typename T>
Field<Options> member(T Options::*m) {
  return {[m](const Options& o) { return Json(o.*m); }, [m](Options& o, const Json& v) { o.*m = v.get<T>(); }};
}

template <typename Options>
Json options_to_json(const Options& o, const std::map<std::string, Field<Options>>& fields) {
  Json j{{"schema_version", kSchemaVersion}};
  for (const auto& [key, f] : fields) j[key] = f.write(o);
  return j;
}

template <typename Options>
void merge_options(Options& o, const Json& j, const std::map<std::string, Field<Options>>& fields) {
  if (!j.is_object()) throw FormatError("options must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "schema_version") {
      if (value != kSchemaVersion) throw FormatError("unsupported schema_version");
      continue;
    }
    auto it = fields.find(key);
    if (it == fields.end()) throw FormatError("unknown config key \"" + key + "\"");
    try {
      it->second.read(o, value);
    } catch (const Json::exception& e) {
      throw FormatError("bad value for \"" + key + "\": " + e.what());
    }
  }
}

struct VerifyOptions {
  bool equivalence = true;
  std::string kind = "td0";
  double lambda = 0.0;
  std::size_t layers = 40;
  std::size_t eq_context = 20;
  std::size_t dim = 4;
  std::size_t seeds = 30;
  double gamma = 0.9;
  bool invariant_set = false;
  std::size_t samples = 10000;
  std::size_t is_context = 30;
  std::size_t states = 10;
  double eta = 1.0;
  double c = -1.0;
  double c_prime = 0.0;
  double perturb = 0.0;
  std::uint64_t seed = 0;
};

const std::map<std::string, Field<VerifyOptions>>& verify_fields() {
  using V = VerifyOptions;
  static const std::map<std::string, Field<V>> f = {
      {"equivalence", member(&V::equivalence)}, {"kind", member(&V::kind)},
      {"lambda", member(&V::lambda)},           {"layers", member(&V::layers)},
      {"eq_context", member(&V::eq_context)},   {"dim", member(&V::dim)},
      {"seeds", member(&V::seeds)},             {"gamma", member(&V::gamma)},
      {"invariant_set", member(&V::invariant_set)}, {"samples", member(&V::samples)},
      {"is_context", member(&V::is_context)},   {"states", member(&V::states)},
      {"eta", member(&V::eta)},                 {"c", member(&V::c)},
      {"c_prime", member(&V::c_prime)},         {"perturb", member(&V::perturb)},
      {"seed", member(&V::seed)},
  };
  return f;
}

struct DemoOptions {
  std::size_t tasks = 300;
  std::size_t layers = 15;
  double alpha = 1.0;
  std::size_t max_context = 40;
  std::size_t dim = 5;
  std::size_t states_min = 5;
  std::size_t states_max = 10;
  double gamma = 0.9;
  std::uint64_t seed = 0;
};

const std::map<std::string, Field<DemoOptions>>& demo_fields() {
  using D = DemoOptions;
  static const std::map<std::string, Field<D>> f = {
      {"tasks", member(&D::tasks)},       {"layers", member(&D::layers)},
      {"alpha", member(&D::alpha)},       {"max_context", member(&D::max_context)},
      {"dim", member(&D::dim)},           {"states_min", member(&D::states_min)},
      {"states_max", member(&D::states_max)}, {"gamma", member(&D::gamma)},
      {"seed", member(&D::seed)},
  };
  return f;
}

// ---------------------------------------------------------------------------
// Flags. Every flag maps to one option key; flags given on the command line
// override the config file, which overrides the defaults.

struct FlagSet {
  std::vector<std::pair<CLI::Option*, std::function<void(Json&)>>> entries;

  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& target, const std::string& key,
                   const std::string& help) {
    CLI::Option* opt = app->add_option(flag, target, help);
    entries.emplace_back(opt, [&target, key](Json& j) { j[key] = target; });
    return opt;
  }

  CLI::Option* add_switch(CLI::App* app, const std::string& flag, bool& target, const std::string& key,
                          const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, target, help);
    entries.emplace_back(opt, [&target, key](Json& j) { j[key] = target; });
    return opt;
  }

  Json overrides() const {
    Json j = Json::object();
    for (const auto& [opt, write] : entries)
      if (opt->count() > 0) write(j);
    return j;
  }
};

struct Common {
  std::string out_dir = "ictd_out";
  std::string config;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out-dir", c.out_dir, "Directory for CSV, JSON and manifest output");
  app->add_option("--config", c.config, "JSON file with option values");
  c.seed_opt = app->add_option("--seed", c.seed, "Master random seed");
}

Json load_config(const Common& c) { return c.config.empty() ? Json::object() : read_json_file(c.config); }

// ---------------------------------------------------------------------------
// Manifests

struct RunOutput {
  std::vector<std::string> csv_files;  // relative to the output directory
  bool passed = true;
};

void write_manifest(const fs::path& dir, const std::string& command, const Json& options, const RunOutput& out) {
  Json m{{"schema_version", kSchemaVersion},
         {"command", command},
         {"code_version", ICTD_CODE_VERSION},
         {"options", options},
         {"csv_outputs", out.csv_files}};
  write_json_file((dir / "manifest.json").string(), m);
}

void check_schema(const fs::path& file, const std::vector<std::string>& header) {
  if (!csv_matches_schema(file.string(), header)) {
    throw std::runtime_error("schema self-test failed for " + file.string());
  }
}

// ---------------------------------------------------------------------------
// Commands, run from fully resolved option documents.

RunOutput exec_verify(const Json& doc, const fs::path& dir, std::ostream& out) {
  VerifyOptions o;
  merge_options(o, doc, verify_fields());
  RunOutput result;
  if (o.equivalence) {
    EquivalenceConfig cfg;
    cfg.kind = equivalence_kind_from_string(o.kind);
    cfg.lambda = o.lambda;
    cfg.layers = o.layers;
    cfg.n = o.eq_context;
    cfg.d = o.dim;
    cfg.seeds = o.seeds;
    cfg.gamma = o.gamma;
    cfg.seed = o.seed;
    const EquivalenceReport rep = verify_equivalence(cfg);
    write_csv((dir / "equivalence.csv").string(), equivalence_table(rep));
    check_schema(dir / "equivalence.csv", equivalence_header());
    result.csv_files.push_back("equivalence.csv");
    const bool ok = rep.max_abs_diff() <= kEquivalenceTolerance;
    out << (ok ? "PASS" : "FAIL") << " equivalence kind=" << o.kind << " layers=" << o.layers << " seeds=" << o.seeds
        << " max_abs_diff=" << format_double(rep.max_abs_diff()) << " tol=" << format_double(kEquivalenceTolerance)
        << '\n';
    result.passed = result.passed && ok;
  }
  if (o.invariant_set) {
    InvariantSetConfig cfg;
    cfg.eta = o.eta;
    cfg.c = o.c;
    cfg.c_prime = o.c_prime;
    cfg.n = o.is_context;
    cfg.d = o.dim;
    cfg.states = o.states;
    cfg.gamma = o.gamma;
    cfg.samples = o.samples;
    cfg.seed = o.seed;
    cfg.perturb_p = o.perturb;
    const InvariantSetReport rep = verify_invariant_set(cfg);
    write_csv((dir / "invariant_set.csv").string(), invariant_set_table(rep));
    check_schema(dir / "invariant_set.csv", invariant_set_header());
    result.csv_files.push_back("invariant_set.csv");
    std::size_t outside = 0;
    for (const CoordinateStat& s : rep.off_pattern) outside += !s.consistent_with_zero();
    out << (rep.pass() ? "PASS" : "FAIL") << " invariant-set samples=" << o.samples
        << " off_pattern_outside_4se=" << outside << "/" << rep.off_pattern.size()
        << " mean_se=" << format_double(rep.mean_off_pattern_se()) << '\n';
    result.passed = result.passed && rep.pass();
  }
  return result;
}

RunOutput exec_demo(const Json& doc, const fs::path& dir, std::ostream& out) {
  DemoOptions o;
  merge_options(o, doc, demo_fields());
  if (o.max_context < 1) throw ParameterError("max_context must be at least 1");
  DemoConfig cfg;
  for (std::size_t t = 1; t <= o.max_context; ++t) cfg.grid.push_back(t);
  cfg.tasks = o.tasks;
  cfg.layers = o.layers;
  cfg.alpha = o.alpha;
  cfg.d = o.dim;
  cfg.states_min = o.states_min;
  cfg.states_max = o.states_max;
  cfg.gamma = o.gamma;
  cfg.seed = o.seed;
  const DemoResult res = demo_msve_vs_context(cfg);
  write_csv((dir / "demo.csv").string(), demo_table(res));
  check_schema(dir / "demo.csv", demo_header());
  const DemoRow& first = res.rows.front();
  const DemoRow& last = res.rows.back();
  out << "demo tasks=" << o.tasks << " msve(t=" << first.context << ")=" << format_double(first.mean_msve)
      << " msve(t=" << last.context << ")=" << format_double(last.mean_msve) << '\n';
  return {{"demo.csv"}, true};
}

RunOutput exec_train(const Json& doc, const fs::path& dir, std::ostream& out) {
  const TrainConfig cfg = config_from_json(doc);
  const TrainResult res = train(cfg);
  write_csv((dir / "metrics.csv").string(), metrics_table(res.records));
  check_schema(dir / "metrics.csv", metrics_header());
  write_json_file((dir / "final_params.json").string(), params_to_json(res.params));
  if (!res.snapshots.empty()) {
    fs::create_directories(dir / "snapshots");
    for (const Snapshot& s : res.snapshots) {
      char name[64];
      std::snprintf(name, sizeof name, "task_%06zu.json", s.task_index);
      write_json_file((dir / "snapshots" / name).string(), params_to_json(s.params));
    }
  }
  const MetricRecord fin = elementwise_stats(res.params.layers.front().p, res.params.layers.front().q, cfg.d);
  out << "train tasks=" << cfg.k << " seed=" << cfg.seed << " P[-1,-1]=" << format_double(fin.p_bottom_right)
      << " trQ_left=" << format_double(fin.q_trace_left) << " trQ_right=" << format_double(fin.q_trace_right)
      << " records=" << res.records.size() << '\n';
  return {{"metrics.csv"}, true};
}

RunOutput exec(const std::string& command, const Json& doc, const fs::path& dir, std::ostream& out) {
  fs::create_directories(dir);
  if (command == "verify") return exec_verify(doc, dir, out);
  if (command == "demo") return exec_demo(doc, dir, out);
  if (command == "train") return exec_train(doc, dir, out);
  throw FormatError("unknown command \"" + command + "\"");
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  return sa == sb;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"In-context TD: verification, pretraining and demos"};
  app.require_subcommand(1);

  // verify
  VerifyOptions vo;
  Common vc;
  FlagSet vf;
  CLI::App* verify = app.add_subcommand("verify", "Check constructions against the batch oracles");
  add_common(verify, vc);
  vf.add(verify, "--kind", vo.kind, "kind", "td0 | td0-onelayer | rg | td-lambda | avg");
  vf.add(verify, "--lambda", vo.lambda, "lambda", "Trace decay for td-lambda");
  CLI::Option* layers_opt = vf.add(verify, "--layers", vo.layers, "layers", "Number of layers");
  vf.add(verify, "--dim", vo.dim, "dim", "Feature dimension d");
  vf.add(verify, "--seeds", vo.seeds, "seeds", "Random prompts per check");
  vf.add(verify, "--gamma", vo.gamma, "gamma", "Discount factor");
  std::size_t context = 0;
  CLI::Option* context_opt = verify->add_option("--context", context, "Context length n");
  vf.add_switch(verify, "--invariant-set", vo.invariant_set, "invariant_set", "Run the invariant-set check");
  vf.add(verify, "--samples", vo.samples, "samples", "Monte-Carlo tasks for the invariant-set check");
  vf.add(verify, "--states", vo.states, "states", "Boyan chain size for the invariant-set check");
  vf.add(verify, "--eta", vo.eta, "eta", "theta* eta");
  vf.add(verify, "--c", vo.c, "c", "theta* c");
  vf.add(verify, "--c-prime", vo.c_prime, "c_prime", "theta* c'");
  vf.add(verify, "--perturb", vo.perturb, "perturb", "Offset added to P[2d][0] (negative control)");

  // train
  TrainConfig to;
  Common tc;
  FlagSet tf;
  std::string attn = "linear", source = "boyan";
  bool unshared = false, no_compare = false;
  CLI::App* train_cmd = app.add_subcommand("train", "Multi-task TD pretraining");
  add_common(train_cmd, tc);
  tf.add(train_cmd, "--tasks", to.k, "k", "Number of tasks k");
  tf.add(train_cmd, "--context", to.n, "n", "Context length n");
  tf.add(train_cmd, "--tau", to.tau, "tau", "Trajectory length per task");
  tf.add(train_cmd, "--layers", to.layers, "layers", "Number of layers L");
  tf.add(train_cmd, "--dim", to.d, "d", "Feature dimension d");
  tf.add(train_cmd, "--states", to.states, "states", "Boyan chain size");
  tf.add(train_cmd, "--alpha", to.alpha, "alpha", "Adam step size");
  tf.add(train_cmd, "--gamma", to.gamma, "gamma", "Discount factor");
  tf.add(train_cmd, "--weight-decay", to.weight_decay, "weight_decay", "Decoupled weight decay");
  tf.add(train_cmd, "--attn", attn, "attn", "linear | softmax");
  tf.add(train_cmd, "--task-source", source, "task_source", "boyan | boyan-representable | cartpole");
  tf.add(train_cmd, "--log-every", to.log_every, "log_every", "Updates between metric records (0 = off)");
  tf.add(train_cmd, "--eval-tasks", to.eval_tasks, "eval_tasks", "Tasks per metric record");
  tf.add(train_cmd, "--snapshot-every", to.snapshot_every, "snapshot_every", "Tasks between snapshots (0 = off)");
  tf.add(train_cmd, "--alpha-fit-tasks", to.alpha_fit_tasks, "alpha_fit_tasks", "Tasks for the TD reference fit");
  CLI::Option* unshared_opt = train_cmd->add_flag("--unshared", unshared, "Separate parameters per layer");
  CLI::Option* no_compare_opt = train_cmd->add_flag("--no-compare", no_compare, "Skip VD / IWS / SS");

  // demo
  DemoOptions dopt;
  Common dc;
  FlagSet df;
  CLI::App* demo = app.add_subcommand("demo", "Value error of the TD transformer versus context length");
  add_common(demo, dc);
  df.add(demo, "--tasks", dopt.tasks, "tasks", "Number of tasks");
  df.add(demo, "--layers", dopt.layers, "layers", "Number of layers");
  df.add(demo, "--alpha", dopt.alpha, "alpha", "Step size, C_l = alpha I");
  df.add(demo, "--max-context", dopt.max_context, "max_context", "Grid is 1..max-context");
  df.add(demo, "--dim", dopt.dim, "dim", "Feature dimension");
  df.add(demo, "--states-min", dopt.states_min, "states_min", "Smallest chain");
  df.add(demo, "--states-max", dopt.states_max, "states_max", "Largest chain");
  df.add(demo, "--gamma", dopt.gamma, "gamma", "Discount factor");

  // replay
  std::string manifest_path, replay_dir;
  CLI::App* replay = app.add_subcommand("replay", "Re-run a manifest and compare its CSV outputs bitwise");
  replay->add_option("--manifest", manifest_path, "manifest.json of a previous run")->required();
  replay->add_option("--out-dir", replay_dir, "Where to write the re-run (default: <run>/replay)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    std::string command;
    Json doc;
    fs::path dir;
    if (verify->parsed()) {
      command = "verify";
      VerifyOptions o;
      merge_options(o, load_config(vc), verify_fields());
      Json over = vf.overrides();
      if (context_opt->count()) over["eq_context"] = over["is_context"] = context;
      if (vc.seed_opt->count()) over["seed"] = vc.seed;
      // --invariant-set alone runs only that check unless --kind is also given.
      if (o.invariant_set || over.value("invariant_set", false)) {
        over["equivalence"] = over.contains("kind");
      }
      merge_options(o, over, verify_fields());
      if (o.kind == "td0-onelayer" && !layers_opt->count() && !load_config(vc).contains("layers")) o.layers = 1;
      doc = options_to_json(o, verify_fields());
      dir = vc.out_dir;
    } else if (train_cmd->parsed()) {
      command = "train";
      TrainConfig cfg = config_from_json(load_config(tc));
      Json over = tf.overrides();
      if (unshared_opt->count()) over["shared"] = !unshared;
      if (no_compare_opt->count()) over["compare_to_td"] = !no_compare;
      if (tc.seed_opt->count()) over["seed"] = tc.seed;
      merge_config(cfg, over);
      cfg.validate();
      doc = config_to_json(cfg);
      dir = tc.out_dir;
    } else if (demo->parsed()) {
      command = "demo";
      DemoOptions o;
      merge_options(o, load_config(dc), demo_fields());
      Json over = df.overrides();
      if (dc.seed_opt->count()) over["seed"] = dc.seed;
      merge_options(o, over, demo_fields());
      doc = options_to_json(o, demo_fields());
      dir = dc.out_dir;
    } else {
      const Json m = read_json_file(manifest_path);
      if (!m.contains("command") || !m.contains("options") || !m.contains("csv_outputs")) {
        throw FormatError("manifest is missing command, options or csv_outputs");
      }
      const fs::path original = fs::path(manifest_path).parent_path();
      const fs::path target = replay_dir.empty() ? original / "replay" : fs::path(replay_dir);
      const RunOutput r = exec(m["command"].get<std::string>(), m["options"], target, out);
      write_manifest(target, m["command"].get<std::string>(), m["options"], r);
      bool identical = true;
      for (const std::string& f : m["csv_outputs"].get<std::vector<std::string>>()) {
        const bool same = same_bytes(original / f, target / f);
        out << (same ? "MATCH " : "DIFFER ") << f << '\n';
        identical = identical && same;
      }
      return identical ? kExitOk : kExitFailed;
    }

    const RunOutput r = exec(command, doc, dir, out);
    write_manifest(dir, command, doc, r);
    return r.passed ? kExitOk : kExitFailed;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailed;
  }
}

}  // namespace ictd::cli
