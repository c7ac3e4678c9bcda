#include "fedgsca/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fedgsca/error.hpp"
#include "fedgsca/rng.hpp"

namespace fedgsca {

using nlohmann::json;

namespace {

// Typed access into a JSON object that reports failures by dotted path.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  std::string field(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  bool has(std::string_view key) const { return node_.contains(key); }

  const json& at(std::string_view key) const {
    auto it = node_.find(key);
    if (it == node_.end()) throw ValidationError(field(key), "is required");
    return *it;
  }

  Reader object(std::string_view key) const { return Reader(at(key), field(key)); }

  template <typename T>
  T get(std::string_view key) const {
    return convert<T>(at(key), field(key));
  }

  template <typename T>
  T get_or(std::string_view key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ValidationError(path, "must be a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ValidationError(path, "must be an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
            throw ValidationError(path, "must be nonnegative");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ValidationError(path, "must be a boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ValidationError(path, "must be a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(path, e.what());
    }
  }

  template <typename T>
  std::vector<T> list(std::string_view key) const {
    const json& arr = at(key);
    if (!arr.is_array()) throw ValidationError(field(key), "must be an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < arr.size(); ++i)
      out.push_back(convert<T>(arr[i], field(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  const json& node() const { return node_; }
  const std::string& path() const { return path_; }

 private:
  const json& node_;
  std::string path_;
};

template <typename Fn>
auto parse_enum(const Reader& r, std::string_view key, Fn fn, const std::string& fallback) {
  const std::string text = r.get_or<std::string>(key, fallback);
  try {
    return fn(text);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(r.field(key), e.what());
  }
}

DataSpec parse_data(const Reader& r) {
  DataSpec d;
  d.num_classes = r.get<int>("num_classes");
  d.feature_dim = r.get<int>("feature_dim");
  d.samples_per_client = r.list<int>("samples_per_client");
  d.class_proportions = r.list<double>("class_proportions");
  d.cluster_separation = r.get<double>("cluster_separation");
  d.test_samples = r.get_or<int>("test_samples", 1000);
  return d;
}

ConfusionMap parse_confusion(const Reader& r) {
  ConfusionMap map;
  for (const auto& [key, value] : r.node().items()) {
    const std::string path = r.field(key);
    int source = 0;
    try {
      std::size_t used = 0;
      source = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ValidationError(path, "keys must be class indices");
    }
    CandidateSet set;
    if (value.is_string()) {
      if (value.get<std::string>() != "random") throw ValidationError(path, "only the string \"random\" is allowed");
      set.random_choice = true;
    } else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i)
        set.classes.push_back(Reader::convert<int>(value[i], path + "[" + std::to_string(i) + "]"));
    } else {
      throw ValidationError(path, "must be \"random\" or an array of class indices");
    }
    map[source] = std::move(set);
  }
  return map;
}

NoiseSpec parse_noise(const Reader& r) {
  NoiseSpec n;
  const json& pcs = r.at("per_client");
  if (!pcs.is_array()) throw ValidationError(r.field("per_client"), "must be an array");
  for (std::size_t k = 0; k < pcs.size(); ++k) {
    Reader e(pcs[k], r.field("per_client") + "[" + std::to_string(k) + "]");
    ClientNoise cn;
    cn.kind = parse_enum(e, "kind", parse_noise_kind, "symmetric");
    cn.rate = e.get<double>("rate");
    n.per_client.push_back(cn);
  }
  if (r.has("confusion_map")) n.confusion_map = parse_confusion(r.object("confusion_map"));
  return n;
}

TrainConfig parse_train(const Reader& r) {
  TrainConfig t;
  t.local_epochs = r.get_or<int>("local_epochs", t.local_epochs);
  t.batch_size = r.get_or<int>("batch_size", t.batch_size);
  t.base_learning_rate = r.get_or<double>("learning_rate", t.base_learning_rate);
  if (r.has("lr_drop_points")) t.lr_drop_points = r.list<double>("lr_drop_points");
  t.lr_drop_factor = r.get_or<double>("lr_drop_factor", t.lr_drop_factor);
  t.weight_decay = r.get_or<double>("weight_decay", t.weight_decay);
  if (r.has("hidden")) t.hidden = r.list<int>("hidden");
  return t;
}

CredalConfig parse_credal(const Reader& r) {
  CredalConfig c;
  c.alpha = r.get_or<double>("alpha", c.alpha);
  c.beta_start = r.get_or<double>("beta_start", c.beta_start);
  c.beta_end = r.get_or<double>("beta_end", c.beta_end);
  c.schedule = parse_enum(r, "schedule", parse_beta_schedule, "cosine");
  return c;
}

FedConfig parse_fed(const Reader& r) {
  FedConfig f;
  f.method = parse_enum(r, "method", parse_method, "fedgsca");
  f.rounds = r.get<int>("rounds");
  if (r.has("num_clients")) f.num_clients = r.get<int>("num_clients");
  else f.num_clients = -1;
  f.zeta0 = r.get_or<double>("zeta0", f.zeta0);
  f.fixed_threshold = r.get_or<double>("fixed_threshold", f.fixed_threshold);
  f.parallel_clients = r.get_or<bool>("parallel_clients", false);
  const std::string weights = r.get_or<std::string>("aggregation_weights", "n_k");
  if (weights == "n_k") f.weights = AggregationWeights::OriginalSize;
  else if (weights == "train_set") f.weights = AggregationWeights::TrainSetSize;
  else throw ValidationError(r.field("aggregation_weights"), "must be \"n_k\" or \"train_set\"");
  const std::string divisor = r.get_or<std::string>("avg_conf_divisor", "clean_set");
  if (divisor == "clean_set") f.avg_divisor = AvgConfDivisor::CleanSetSize;
  else if (divisor == "per_class") f.avg_divisor = AvgConfDivisor::PerClassCount;
  else throw ValidationError(r.field("avg_conf_divisor"), "must be \"clean_set\" or \"per_class\"");
  if (r.has("train")) f.train = parse_train(r.object("train"));
  if (r.has("credal")) f.credal = parse_credal(r.object("credal"));
  if (r.has("selector")) {
    Reader s = r.object("selector");
    f.em.max_iters = s.get_or<int>("max_iters", f.em.max_iters);
    f.em.tol = s.get_or<double>("tol", f.em.tol);
  }
  f.credal.total_rounds = f.rounds;
  return f;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("<manifest>", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("<manifest>", std::string("malformed JSON: ") + e.what());
  }
}

void flatten(const json& node, const std::string& path, std::map<std::string, std::string>& out) {
  if (node.is_object()) {
    for (const auto& [k, v] : node.items()) flatten(v, path.empty() ? k : path + "." + k, out);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) flatten(node[i], path + "[" + std::to_string(i) + "]", out);
  } else {
    out[path] = node.dump();
  }
}

}  // namespace

void validate(const RunManifest& m) {
  validate(m.data);
  if (m.trials < 1) throw ValidationError("trials", "must be >= 1");
  validate(m.noise, m.data.num_classes, m.data.num_clients());
  if (m.fed.num_clients != m.data.num_clients())
    throw ValidationError("fed.num_clients", "must match data.samples_per_client (" +
                                                 std::to_string(m.data.num_clients()) + ")");
  if (m.fed.num_classes != m.data.num_classes) throw ValidationError("fed.num_classes", "must match data.num_classes");
  validate(m.fed);
}

RunManifest parse_manifest(std::string_view text) {
  const json doc = parse_json(text);
  Reader root(doc, "");
  const std::string schema = root.get<std::string>("schema");
  if (schema != kManifestSchema)
    throw ValidationError("schema", "unsupported schema '" + schema + "', expected '" + std::string(kManifestSchema) + "'");

  RunManifest m;
  m.label = root.get_or<std::string>("label", "");
  m.seed = root.get_or<std::uint64_t>("seed", 0);
  m.trials = root.get_or<int>("trials", 1);
  m.output_dir = root.get_or<std::string>("output", "runs/out");
  m.data = parse_data(root.object("data"));
  m.noise = parse_noise(root.object("noise"));
  m.fed = parse_fed(root.object("fed"));
  if (m.fed.num_clients < 0) m.fed.num_clients = m.data.num_clients();
  m.fed.num_classes = m.data.num_classes;
  if (m.label.empty()) m.label = std::string(to_string(m.fed.method));
  validate(m);
  return m;
}

RunManifest load_manifest(const std::filesystem::path& path) { return parse_manifest(read_file(path)); }

TrialSeeds trial_seeds(std::uint64_t seed, int trial) {
  const std::uint64_t base = seed + static_cast<std::uint64_t>(trial);
  return {derive_seed(base, {stream::kData}), derive_seed(base, {stream::kNoise}), derive_seed(base, {stream::kTrain})};
}

std::vector<std::string> fixture_differences(const std::filesystem::path& a, const std::filesystem::path& b) {
  const json ja = parse_json(read_file(a));
  const json jb = parse_json(read_file(b));
  std::map<std::string, std::string> fa, fb;
  for (const char* key : {"data", "noise", "seed", "trials"}) {
    if (ja.contains(key)) flatten(ja[key], key, fa);
    if (jb.contains(key)) flatten(jb[key], key, fb);
  }
  std::set<std::string> keys;
  for (const auto& [k, _] : fa) keys.insert(k);
  for (const auto& [k, _] : fb) keys.insert(k);
  std::vector<std::string> diffs;
  for (const auto& k : keys) {
    auto ia = fa.find(k), ib = fb.find(k);
    const std::string va = ia == fa.end() ? "<absent>" : ia->second;
    const std::string vb = ib == fb.end() ? "<absent>" : ib->second;
    if (va != vb) diffs.push_back(k + ": " + va + " != " + vb);
  }
  return diffs;
}

}  // namespace fedgsca
