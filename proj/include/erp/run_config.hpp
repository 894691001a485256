#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "erp/io.hpp"
#include "erp/policy.hpp"
#include "erp/policy_io.hpp"
#include "erp/remote.hpp"
#include "erp/reward.hpp"
#include "erp/search.hpp"
#include "erp/vocab.hpp"

namespace erp {

inline constexpr int kConfigFormatVersion = 1;

namespace cfgdetail {

[[noreturn]] inline void fail(const std::string& where, const std::string& msg) {
  throw ConfigError(where + ": " + msg);
}

inline int get_int(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "must be an integer");
  return j.get<int>();
}
inline std::uint64_t get_u64(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "must be a non-negative integer");
  if (!j.is_number_unsigned() && j.get<std::int64_t>() < 0)
    fail(where, "must be a non-negative integer");
  return j.get<std::uint64_t>();
}
inline double get_real(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "must be a number");
  return j.get<double>();
}
inline std::string get_string(const nlohmann::json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "must be a string");
  return j.get<std::string>();
}
inline bool get_bool(const nlohmann::json& j, const std::string& where) {
  if (!j.is_boolean()) fail(where, "must be a boolean");
  return j.get<bool>();
}

/// Object reader that tracks which keys were consumed; finish() rejects the
/// rest, so misspelled or unsupported keys never pass silently.
class Strict {
 public:
  Strict(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail(where_, "must be an object");
  }

  const nlohmann::json* get(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const nlohmann::json& require(const std::string& key) {
    const nlohmann::json* v = get(key);
    if (v == nullptr) fail(where_ + "." + key, "is required");
    return *v;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) fail(where_ + "." + key, "unknown key");
  }

  std::string sub(const std::string& key) const { return where_ + "." + key; }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> used_;
};

}  // namespace cfgdetail

struct PolicySource {
  enum class Kind { ngram, uniform, file, remote };
  Kind kind = Kind::ngram;
  std::filesystem::path corpus;  // ngram, uniform, remote
  int n = 3;
  double k = 0.1;
  std::filesystem::path path;  // file
  RemoteConfig remote;
};

struct RunConfig {
  TokenMode mode = TokenMode::smiles;
  SearchConfig search;
  PolicySource policy;
  RewardSpec reward;
  std::filesystem::path output_dir = "out";
  std::vector<std::string> warnings;
};

struct PlanConfig {
  TokenMode mode = TokenMode::smiles;
  PolicySource policy;
  RewardSpec reward;
  std::vector<SearchConfig> cells;
  std::filesystem::path output_dir = "out";
  std::vector<std::string> warnings;
};

namespace cfgdetail {

inline TokenMode parse_mode(const nlohmann::json& j, const std::string& where) {
  std::string mode = get_string(j, where);
  if (mode == "char") return TokenMode::chars;
  if (mode == "smiles") return TokenMode::smiles;
  fail(where, "must be 'char' or 'smiles'");
}

/// Applies strict search-block fields onto base. Reports whether "e" was
/// given explicitly so callers can warn when the algorithm ignores it.
inline SearchConfig parse_search(const nlohmann::json& j, const std::string& where,
                                 SearchConfig base, bool* e_explicit,
                                 const std::set<std::string>& forbidden = {}) {
  Strict obj(j, where);
  auto forbid = [&](const char* key) {
    if (forbidden.count(key) && obj.get(key) != nullptr)
      fail(where + "." + key, "may not be set here");
  };
  for (const char* key : {"algorithm", "rng_seed"}) forbid(key);

  if (const auto* v = obj.get("algorithm"))
    base.algorithm = parse_algorithm(get_string(*v, obj.sub("algorithm")));
  if (const auto* v = obj.get("rollouts")) base.rollouts = get_int(*v, obj.sub("rollouts"));
  if (const auto* v = obj.get("c_p")) base.c_p = get_real(*v, obj.sub("c_p"));
  if (const auto* v = obj.get("tau")) base.tau = get_real(*v, obj.sub("tau"));
  if (const auto* v = obj.get("e")) {
    base.e = get_int(*v, obj.sub("e"));
    if (e_explicit != nullptr) *e_explicit = true;
  }
  if (const auto* v = obj.get("p")) base.p = get_real(*v, obj.sub("p"));
  if (const auto* v = obj.get("k")) base.k = get_int(*v, obj.sub("k"));
  if (const auto* v = obj.get("b")) base.b = get_int(*v, obj.sub("b"));
  if (const auto* v = obj.get("H")) base.H = get_int(*v, obj.sub("H"));
  if (const auto* v = obj.get("rng_seed")) base.rng_seed = get_u64(*v, obj.sub("rng_seed"));
  if (const auto* v = obj.get("expansion_filter"))
    base.expansion_filter = parse_filter(get_string(*v, obj.sub("expansion_filter")));
  if (const auto* v = obj.get("entropy_normalized"))
    base.entropy_normalized = get_bool(*v, obj.sub("entropy_normalized"));
  obj.finish();
  return base;
}

inline std::filesystem::path resolve(const std::filesystem::path& base_dir,
                                     const std::string& raw) {
  std::filesystem::path p(raw);
  return p.is_absolute() ? p : base_dir / p;
}

inline void require_exists(const std::filesystem::path& p, const std::string& where) {
  if (!std::filesystem::exists(p)) fail(where, "path does not exist: " + p.string());
}

inline PolicySource parse_policy(const nlohmann::json& j, const std::string& where,
                                 const std::filesystem::path& base_dir) {
  Strict obj(j, where);
  std::string type = get_string(obj.require("type"), obj.sub("type"));
  PolicySource src;
  if (type == "ngram") {
    src.kind = PolicySource::Kind::ngram;
    src.corpus = resolve(base_dir, get_string(obj.require("corpus"), obj.sub("corpus")));
    require_exists(src.corpus, obj.sub("corpus"));
    if (const auto* v = obj.get("n")) src.n = get_int(*v, obj.sub("n"));
    if (const auto* v = obj.get("k")) src.k = get_real(*v, obj.sub("k"));
    if (src.n < 1) fail(obj.sub("n"), "must be >= 1");
    if (!(src.k > 0.0)) fail(obj.sub("k"), "must be > 0");
  } else if (type == "uniform") {
    src.kind = PolicySource::Kind::uniform;
    src.corpus = resolve(base_dir, get_string(obj.require("corpus"), obj.sub("corpus")));
    require_exists(src.corpus, obj.sub("corpus"));
  } else if (type == "file") {
    src.kind = PolicySource::Kind::file;
    src.path = resolve(base_dir, get_string(obj.require("path"), obj.sub("path")));
    require_exists(src.path, obj.sub("path"));
  } else if (type == "remote") {
    src.kind = PolicySource::Kind::remote;
    src.corpus = resolve(base_dir, get_string(obj.require("corpus"), obj.sub("corpus")));
    require_exists(src.corpus, obj.sub("corpus"));
    src.remote.endpoint = get_string(obj.require("endpoint"), obj.sub("endpoint"));
    if (const auto* v = obj.get("timeout_ms"))
      src.remote.timeout_ms = get_int(*v, obj.sub("timeout_ms"));
    if (const auto* v = obj.get("retries"))
      src.remote.retries = get_int(*v, obj.sub("retries"));
    if (src.remote.timeout_ms < 1) fail(obj.sub("timeout_ms"), "must be >= 1");
    if (src.remote.retries < 0) fail(obj.sub("retries"), "must be >= 0");
  } else {
    fail(obj.sub("type"), "must be one of ngram, uniform, file, remote");
  }
  obj.finish();
  return src;
}

inline const std::set<std::string>& critic_common_keys() {
  static const std::set<std::string> keys = {"name", "direction", "min", "max"};
  return keys;
}

inline CriticSpec parse_critic(const nlohmann::json& j, const std::string& where) {
  Strict obj(j, where);
  std::string kind = get_string(obj.require("kind"), obj.sub("kind"));
  const nlohmann::json& params = obj.require("params");
  obj.finish();
  if (!params.is_object()) fail(where + ".params", "must be an object");

  std::set<std::string> allowed = critic_common_keys();
  if (kind == "length_window") {
    allowed.insert("target");
  } else if (kind == "motif_count") {
    allowed.insert("motif");
  } else if (kind == "char_balance") {
    allowed.insert("char");
  } else if (kind == "table_lookup") {
    allowed.insert("table");
  } else if (kind == "remote") {
    allowed.insert("endpoint");
    allowed.insert("timeout_ms");
    allowed.insert("retries");
  } else {
    fail(where + ".kind", "unknown critic kind '" + kind + "'");
  }
  for (const auto& [key, value] : params.items())
    if (!allowed.count(key)) fail(where + ".params." + key, "unknown key");

  // Critic construction errors count as config errors when the critic comes
  // from a config file, so they carry the field path and exit code 2.
  auto build = [&](const std::string& build_kind,
                   const nlohmann::json& build_params) -> CriticSpec {
    try {
      return builtin_critic(build_kind, build_params);
    } catch (const InvalidCritic& e) {
      fail(where + ".params", e.what());
    }
  };

  if (kind != "remote") return build(kind, params);

  RemoteConfig remote;
  if (!params.contains("endpoint"))
    fail(where + ".params.endpoint", "is required");
  remote.endpoint = get_string(params.at("endpoint"), where + ".params.endpoint");
  if (params.contains("timeout_ms"))
    remote.timeout_ms = get_int(params.at("timeout_ms"), where + ".params.timeout_ms");
  if (params.contains("retries"))
    remote.retries = get_int(params.at("retries"), where + ".params.retries");

  // Reuse the stock-bounds/override logic via a table_lookup shell, then
  // swap in the remote evaluator.
  nlohmann::json shape_params = params;
  shape_params.erase("endpoint");
  shape_params.erase("timeout_ms");
  shape_params.erase("retries");
  shape_params["table"] = nlohmann::json::object();
  CriticSpec shape = build("table_lookup", shape_params);
  return remote_critic(std::move(remote), std::move(shape));
}

inline RewardSpec parse_critics(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "must be a non-empty array");
  RewardSpec spec;
  for (std::size_t i = 0; i < j.size(); ++i)
    spec.critics.push_back(parse_critic(j[i], where + "[" + std::to_string(i) + "]"));
  try {
    spec.validate();
  } catch (const InvalidCritic& e) {
    fail(where, e.what());
  }
  return spec;
}

inline nlohmann::json parse_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

inline void check_version(Strict& obj) {
  const nlohmann::json& v = obj.require("format_version");
  int version = get_int(v, obj.sub("format_version"));
  if (version != kConfigFormatVersion)
    fail(obj.sub("format_version"),
         "unsupported version " + std::to_string(version) + " (expected " +
             std::to_string(kConfigFormatVersion) + ")");
}

}  // namespace cfgdetail

inline RunConfig load_run_config(const std::filesystem::path& path) {
  using namespace cfgdetail;
  nlohmann::json j = parse_file(path);
  std::filesystem::path base_dir = path.has_parent_path() ? path.parent_path()
                                                          : std::filesystem::path(".");
  Strict obj(j, "config");
  check_version(obj);
  RunConfig config;
  if (const auto* v = obj.get("mode")) config.mode = parse_mode(*v, obj.sub("mode"));
  bool e_explicit = false;
  if (const auto* v = obj.get("search"))
    config.search = parse_search(*v, "config.search", SearchConfig{}, &e_explicit);
  config.search.validate();
  config.policy = parse_policy(obj.require("policy"), "config.policy", base_dir);
  config.reward = parse_critics(obj.require("critics"), "config.critics");
  if (const auto* v = obj.get("output_dir"))
    config.output_dir = resolve(base_dir, get_string(*v, obj.sub("output_dir")));
  obj.finish();
  if (e_explicit && config.search.algorithm != Algorithm::ph_uct)
    config.warnings.push_back("config.search.e is ignored by algorithm '" +
                              std::string(algorithm_name(config.search.algorithm)) + "'");
  return config;
}

inline PlanConfig load_plan_config(const std::filesystem::path& path) {
  using namespace cfgdetail;
  nlohmann::json j = parse_file(path);
  std::filesystem::path base_dir = path.has_parent_path() ? path.parent_path()
                                                          : std::filesystem::path(".");
  Strict obj(j, "plan");
  check_version(obj);
  PlanConfig plan;
  if (const auto* v = obj.get("mode")) plan.mode = parse_mode(*v, obj.sub("mode"));
  plan.policy = parse_policy(obj.require("policy"), "plan.policy", base_dir);
  plan.reward = parse_critics(obj.require("critics"), "plan.critics");

  SearchConfig base;
  if (const auto* v = obj.get("base_search"))
    base = parse_search(*v, "plan.base_search", SearchConfig{}, nullptr);

  const nlohmann::json& cells = obj.require("cells");
  if (!cells.is_array() || cells.empty()) fail("plan.cells", "must be a non-empty array");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string where = "plan.cells[" + std::to_string(i) + "]";
    Strict cell(cells[i], where);
    Algorithm algorithm =
        parse_algorithm(get_string(cell.require("algorithm"), cell.sub("algorithm")));

    std::vector<std::uint64_t> seeds;
    const auto* single = cell.get("seed");
    const auto* multi = cell.get("seeds");
    if ((single == nullptr) == (multi == nullptr))
      fail(where, "needs exactly one of 'seed' or 'seeds'");
    if (single != nullptr) {
      seeds.push_back(get_u64(*single, cell.sub("seed")));
    } else {
      if (!multi->is_array() || multi->empty())
        fail(cell.sub("seeds"), "must be a non-empty array");
      std::set<std::uint64_t> unique;
      for (std::size_t s = 0; s < multi->size(); ++s) {
        std::uint64_t seed =
            get_u64((*multi)[s], cell.sub("seeds") + "[" + std::to_string(s) + "]");
        if (!unique.insert(seed).second)
          fail(cell.sub("seeds"), "duplicate seed " + std::to_string(seed));
        seeds.push_back(seed);
      }
    }

    SearchConfig cfg = base;
    bool e_explicit = false;
    if (const auto* v = cell.get("overrides"))
      cfg = parse_search(*v, where + ".overrides", base, &e_explicit,
                         {"algorithm", "rng_seed"});
    cell.finish();
    cfg.algorithm = algorithm;
    if (e_explicit && algorithm != Algorithm::ph_uct)
      plan.warnings.push_back(where + ".overrides.e is ignored by algorithm '" +
                              std::string(algorithm_name(algorithm)) + "'");
    for (std::uint64_t seed : seeds) {
      cfg.rng_seed = seed;
      cfg.validate();
      plan.cells.push_back(cfg);
    }
  }
  if (const auto* v = obj.get("output_dir"))
    plan.output_dir = resolve(base_dir, get_string(*v, obj.sub("output_dir")));
  obj.finish();
  return plan;
}

/// A concrete policy plus the vocabulary it speaks.
struct LoadedPolicy {
  Vocabulary vocab;
  std::unique_ptr<Policy> policy;
};

inline LoadedPolicy instantiate_policy(const PolicySource& source, TokenMode mode) {
  LoadedPolicy loaded;
  switch (source.kind) {
    case PolicySource::Kind::ngram: {
      auto lines = read_corpus(source.corpus);
      loaded.vocab = build_vocab(lines, mode);
      std::vector<SequenceState> states;
      states.reserve(lines.size());
      for (const auto& line : lines)
        states.push_back(tokenize(loaded.vocab, line, mode));
      loaded.policy = std::make_unique<NGramPolicy>(
          train_ngram(states, source.n, source.k, loaded.vocab));
      break;
    }
    case PolicySource::Kind::uniform: {
      loaded.vocab = build_vocab(read_corpus(source.corpus), mode);
      loaded.policy = std::make_unique<UniformPolicy>(loaded.vocab.size());
      break;
    }
    case PolicySource::Kind::file: {
      auto policy = std::make_unique<NGramPolicy>(load_policy(source.path));
      loaded.vocab = policy->vocab();
      loaded.policy = std::move(policy);
      break;
    }
    case PolicySource::Kind::remote: {
      loaded.vocab = build_vocab(read_corpus(source.corpus), mode);
      loaded.policy = std::make_unique<RemotePolicy>(source.remote, loaded.vocab.size());
      break;
    }
  }
  return loaded;
}

}  // namespace erp
