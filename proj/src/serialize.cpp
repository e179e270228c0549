#include "ictd/serialize.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace ictd {

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) throw FormatError("expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string("missing key \"") + key + "\"");
  return *it;
}

template <typename T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

void check_version(const Json& j) {
  const int v = get<int>(j, "schema_version");
  if (v != kSchemaVersion) throw FormatError("unsupported schema_version " + std::to_string(v));
}

Json vector_to_json(const Vector& v) { return Json(v); }

Vector vector_from_json(const Json& j, const char* key) { return get<Vector>(j, key); }

}  // namespace

Json matrix_to_json(const Matrix& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", Vector(m.data().begin(), m.data().end())}};
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = get<std::size_t>(j, "rows");
  const auto cols = get<std::size_t>(j, "cols");
  Vector data = get<Vector>(j, "data");
  if (data.size() != rows * cols) throw FormatError("matrix data does not match its shape");
  return Matrix(rows, cols, std::move(data));
}

Json params_to_json(const TransformerParams& params) {
  Json layers = Json::array();
  for (const LayerParams& l : params.layers) layers.push_back({{"p", matrix_to_json(l.p)}, {"q", matrix_to_json(l.q)}});
  return Json{{"schema_version", kSchemaVersion},
              {"kind", "transformer"},
              {"attn", to_string(params.attn)},
              {"mask", {{"variant", to_string(params.mask.variant)}, {"lambda", params.mask.lambda}}},
              {"num_layers", params.num_layers},
              {"shared", params.shared},
              {"layers", std::move(layers)}};
}

TransformerParams params_from_json(const Json& j) {
  check_version(j);
  if (get<std::string>(j, "kind") != "transformer") throw FormatError("not a transformer parameter document");
  TransformerParams params;
  try {
    params.attn = attention_kind_from_string(get<std::string>(j, "attn"));
    const Json& mask = field(j, "mask");
    params.mask.variant = mask_variant_from_string(get<std::string>(mask, "variant"));
    params.mask.lambda = get<double>(mask, "lambda");
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  params.num_layers = get<std::size_t>(j, "num_layers");
  params.shared = get<bool>(j, "shared");
  for (const Json& l : field(j, "layers")) {
    params.layers.push_back({matrix_from_json(field(l, "p")), matrix_from_json(field(l, "q"))});
  }
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("inconsistent parameters: ") + e.what());
  }
  return params;
}

Json two_head_to_json(const TwoHeadParams& params) {
  Json layers = Json::array();
  for (const TwoHeadLayer& l : params.layers) {
    layers.push_back({{"p1", matrix_to_json(l.p1)},
                      {"p2", matrix_to_json(l.p2)},
                      {"q", matrix_to_json(l.q)},
                      {"w", matrix_to_json(l.w)}});
  }
  return Json{{"schema_version", kSchemaVersion}, {"kind", "two_head"}, {"layers", std::move(layers)}};
}

TwoHeadParams two_head_from_json(const Json& j) {
  check_version(j);
  if (get<std::string>(j, "kind") != "two_head") throw FormatError("not a two-head parameter document");
  TwoHeadParams params;
  for (const Json& l : field(j, "layers")) {
    params.layers.push_back({matrix_from_json(field(l, "p1")), matrix_from_json(field(l, "p2")),
                             matrix_from_json(field(l, "q")), matrix_from_json(field(l, "w"))});
  }
  return params;
}

Json task_to_json(const Task& task) {
  Json j{{"schema_version", kSchemaVersion},
         {"source", to_string(task.source)},
         {"gamma", task.gamma},
         {"seed", task.seed}};
  if (task.finite()) {
    j["p0"] = vector_to_json(task.mrp->p0);
    j["transition"] = matrix_to_json(task.mrp->transition);
    j["reward"] = vector_to_json(task.mrp->reward);
    j["phi"] = matrix_to_json(task.features.phi);
    if (task.w_star) j["w_star"] = vector_to_json(*task.w_star);
    return j;
  }
  const CartPoleEnv& env = *task.cartpole;
  const CartPolePhysics& ph = env.physics();
  j["physics"] = {{"cart_mass", ph.cart_mass}, {"pole_mass", ph.pole_mass}, {"gravity", ph.gravity},
                  {"pole_length", ph.pole_length}, {"tau", ph.tau}, {"force", ph.force}};
  j["epsilon"] = env.epsilon();
  j["feature_dim"] = env.feature_dim();
  j["oracle_seed"] = env.oracle_seed();
  j["tile_widths"] = env.tiles().widths;
  return j;
}

Task task_from_json(const Json& j) {
  check_version(j);
  Task task;
  try {
    task.source = task_source_from_string(get<std::string>(j, "source"));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  task.gamma = get<double>(j, "gamma");
  task.seed = get<std::uint64_t>(j, "seed");
  if (task.source != TaskSource::CartPole) {
    FiniteMrp mrp{vector_from_json(j, "p0"), matrix_from_json(field(j, "transition")), vector_from_json(j, "reward")};
    try {
      mrp.validate();
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("invalid MRP: ") + e.what());
    }
    task.mrp = std::move(mrp);
    task.features.phi = matrix_from_json(field(j, "phi"));
    if (task.features.phi.rows() != task.mrp->states()) throw FormatError("phi rows must equal the state count");
    if (j.contains("w_star")) task.w_star = vector_from_json(j, "w_star");
    return task;
  }
  const Json& pj = field(j, "physics");
  CartPolePhysics ph;
  ph.cart_mass = get<double>(pj, "cart_mass");
  ph.pole_mass = get<double>(pj, "pole_mass");
  ph.gravity = get<double>(pj, "gravity");
  ph.pole_length = get<double>(pj, "pole_length");
  ph.tau = get<double>(pj, "tau");
  ph.force = get<double>(pj, "force");
  TileCoding tiles;
  tiles.widths = get<std::array<double, 4>>(j, "tile_widths");
  task.cartpole = std::make_shared<const CartPoleEnv>(ph, get<double>(j, "epsilon"), get<std::size_t>(j, "feature_dim"),
                                                      get<std::uint64_t>(j, "oracle_seed"), tiles);
  return task;
}

namespace {

// One reader/writer pair per config key.
struct ConfigField {
  std::function<Json(const TrainConfig&)> write;
  std::function<void(TrainConfig&, const Json&)> read;
};

template <typename T>
ConfigField plain(T TrainConfig::*member) {
  return {[member](const TrainConfig& c) { return Json(c.*member); },
          [member](TrainConfig& c, const Json& v) { c.*member = v.get<T>(); }};
}

const std::map<std::string, ConfigField>& config_fields() {
  static const std::map<std::string, ConfigField> fields = {
      {"n", plain(&TrainConfig::n)},
      {"tau", plain(&TrainConfig::tau)},
      {"k", plain(&TrainConfig::k)},
      {"alpha", plain(&TrainConfig::alpha)},
      {"gamma", plain(&TrainConfig::gamma)},
      {"layers", plain(&TrainConfig::layers)},
      {"shared", plain(&TrainConfig::shared)},
      {"attn",
       {[](const TrainConfig& c) { return Json(to_string(c.attn)); },
        [](TrainConfig& c, const Json& v) { c.attn = attention_kind_from_string(v.get<std::string>()); }}},
      {"d", plain(&TrainConfig::d)},
      {"weight_decay", plain(&TrainConfig::weight_decay)},
      {"seed", plain(&TrainConfig::seed)},
      {"task_source",
       {[](const TrainConfig& c) { return Json(to_string(c.task_source)); },
        [](TrainConfig& c, const Json& v) { c.task_source = task_source_from_string(v.get<std::string>()); }}},
      {"states", plain(&TrainConfig::states)},
      {"init_gain", plain(&TrainConfig::init_gain)},
      {"log_every", plain(&TrainConfig::log_every)},
      {"eval_tasks", plain(&TrainConfig::eval_tasks)},
      {"snapshot_every", plain(&TrainConfig::snapshot_every)},
      {"alpha_fit_tasks", plain(&TrainConfig::alpha_fit_tasks)},
      {"compare_to_td", plain(&TrainConfig::compare_to_td)},
  };
  return fields;
}

}  // namespace

Json config_to_json(const TrainConfig& cfg) {
  Json j{{"schema_version", kSchemaVersion}};
  for (const auto& [key, f] : config_fields()) j[key] = f.write(cfg);
  return j;
}

void merge_config(TrainConfig& base, const Json& j) {
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  if (j.contains("schema_version")) check_version(j);
  const auto& fields = config_fields();
  for (const auto& [key, value] : j.items()) {
    if (key == "schema_version") continue;
    auto it = fields.find(key);
    if (it == fields.end()) throw FormatError("unknown config key \"" + key + "\"");
    try {
      it->second.read(base, value);
    } catch (const Json::exception& e) {
      throw FormatError("bad value for \"" + key + "\": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw FormatError("bad value for \"" + key + "\": " + e.what());
    }
  }
}

TrainConfig config_from_json(const Json& j) {
  TrainConfig cfg;
  merge_config(cfg, j);
  return cfg;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace ictd
