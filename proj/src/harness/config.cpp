#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "trojanrec/harness.hpp"
#include "trojanrec/rng.hpp"

namespace trojanrec::harness {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string_view rest = value;
  while (true) {
    const auto comma = rest.find(',');
    std::string item = trim(rest.substr(0, comma));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value for " + key + ": '" + value + "'");
  return out;
}

template <typename T, typename Parse>
T parse_enum(const std::string& key, const std::string& value, Parse parse) {
  auto parsed = parse(value);
  if (!parsed) throw ConfigError("unknown value for " + key + ": '" + value + "'");
  return *parsed;
}

template <typename T, typename Parse>
std::vector<T> parse_enum_list(const std::string& key, const std::string& value, Parse parse) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) out.push_back(parse_enum<T>(key, item, parse));
  return out;
}

template <typename T>
std::vector<T> parse_number_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) out.push_back(parse_number<T>(key, item));
  return out;
}

std::optional<models::Activation> parse_activation(std::string_view s) {
  if (s == "tanh") return models::Activation::tanh;
  if (s == "identity") return models::Activation::identity;
  return std::nullopt;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

void add_model_keys(std::map<std::string, Setter>& keys, const std::string& section,
                    std::function<models::TrainConfig&(RunConfig&)> target) {
  keys[section + ".latent_dim"] = [target](RunConfig& c, const auto& k, const auto& v) {
    target(c).latent_dim = parse_number<std::size_t>(k, v);
  };
  keys[section + ".l2_weight"] = [target](RunConfig& c, const auto& k, const auto& v) {
    target(c).l2_weight = parse_number<double>(k, v);
  };
  keys[section + ".confidence_weight"] = [target](RunConfig& c, const auto& k, const auto& v) {
    target(c).confidence_weight = parse_number<double>(k, v);
  };
  keys[section + ".epochs"] = [target](RunConfig& c, const auto& k, const auto& v) {
    target(c).epochs = parse_number<std::size_t>(k, v);
  };
  keys[section + ".batch_size"] = [target](RunConfig& c, const auto& k, const auto& v) {
    target(c).batch_size = parse_number<std::size_t>(k, v);
  };
  keys[section + ".learning_rate"] = [target](RunConfig& c, const auto& k, const auto& v) {
    target(c).learning_rate = parse_number<double>(k, v);
  };
  keys[section + ".beta_kl"] = [target](RunConfig& c, const auto& k, const auto& v) {
    target(c).beta_kl = parse_number<double>(k, v);
  };
  keys[section + ".hidden_dim"] = [target](RunConfig& c, const auto& k, const auto& v) {
    target(c).hidden_dim = parse_number<std::size_t>(k, v);
  };
  keys[section + ".activation"] = [target](RunConfig& c, const auto& k, const auto& v) {
    target(c).activation = parse_enum<models::Activation>(k, v, parse_activation);
  };
}

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    // run.seed, run.workers and run.out are handled before the table.
    t["run.method"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.method = parse_enum<attack::Method>(k, v, attack::parse_method);
    };
    t["run.victim"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.victim = parse_enum<models::Family>(k, v, models::parse_family);
    };
    t["run.k_list"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.k_list = parse_number_list<std::size_t>(k, v);
    };

    t["data.name"] = [](RunConfig& c, const auto&, const auto& v) { c.source.name = v; };
    t["data.path"] = [](RunConfig& c, const auto&, const auto& v) { c.source.path = v; };
    t["data.format"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.source.format = parse_enum<data::InputFormat>(k, v, data::parse_input_format);
    };
    t["data.min_user"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.source.min_user = parse_number<std::size_t>(k, v);
    };
    t["data.min_item"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.source.min_item = parse_number<std::size_t>(k, v);
    };
    t["data.n_users"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.source.synthetic.n_users = parse_number<std::size_t>(k, v);
    };
    t["data.n_items"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.source.synthetic.n_items = parse_number<std::size_t>(k, v);
    };
    t["data.n_clusters"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.source.synthetic.n_clusters = parse_number<std::size_t>(k, v);
    };
    t["data.p_in"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.source.synthetic.p_in = parse_number<double>(k, v);
    };
    t["data.p_out"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.source.synthetic.p_out = parse_number<double>(k, v);
    };

    t["targets.mode"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.mode = parse_enum<data::SelectionMode>(k, v, data::parse_selection_mode);
    };
    t["targets.bucket"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.bucket = parse_enum<data::PopularityBucket>(k, v, data::parse_bucket);
    };
    t["targets.num_clusters"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.num_clusters = parse_number<std::size_t>(k, v);
    };

    t["attack.ratio"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.attack.poisoning_ratio = parse_number<double>(k, v);
    };
    t["attack.alpha"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.attack.alpha = parse_number<double>(k, v);
    };
    t["attack.eta"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.attack.eta = parse_number<double>(k, v);
    };
    t["attack.t_adv"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.attack.t_adv = parse_number<std::size_t>(k, v);
    };
    t["attack.t_sub"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.attack.t_sub = parse_number<std::size_t>(k, v);
    };
    t["attack.budget"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.attack.budget_per_user = parse_number<std::size_t>(k, v);
    };
    t["attack.candidate_cap"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.attack.candidate_cap = parse_number<std::size_t>(k, v);
    };
    t["attack.batch_size"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.attack.batch_size = parse_number<std::size_t>(k, v);
    };
    t["attack.top_k"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.attack.top_k = parse_number<std::size_t>(k, v);
    };

    add_model_keys(t, "substitute", [](RunConfig& c) -> models::TrainConfig& { return c.attack.substitute; });
    for (auto family : {models::Family::wrmf, models::Family::item_ae, models::Family::mult_vae}) {
      add_model_keys(t, std::string(models::to_string(family)),
                     [family](RunConfig& c) -> models::TrainConfig& { return c.models[family]; });
    }

    t["grid.ratios"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.grid.ratios = parse_number_list<double>(k, v);
    };
    t["grid.methods"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.grid.methods = parse_enum_list<attack::Method>(k, v, attack::parse_method);
    };
    t["grid.victims"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.grid.victims = parse_enum_list<models::Family>(k, v, models::parse_family);
    };
    t["grid.buckets"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.grid.buckets = parse_enum_list<data::PopularityBucket>(k, v, data::parse_bucket);
    };
    t["grid.modes"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.grid.modes = parse_enum_list<data::SelectionMode>(k, v, data::parse_selection_mode);
    };
    t["grid.seeds"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.grid.seeds = parse_number_list<std::uint64_t>(k, v);
    };

    t["detect.iterations"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.detect.iterations = parse_number<std::size_t>(k, v);
    };
    t["detect.damping"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.detect.damping = parse_number<double>(k, v);
    };
    t["detect.heuristics"] = [](RunConfig& c, const auto& k, const auto& v) {
      c.detect.heuristics = parse_enum_list<detect::Heuristic>(k, v, detect::parse_heuristic);
    };
    return t;
  }();
  return table;
}

}  // namespace

models::TrainConfig RunConfig::model_config(models::Family family) const {
  auto it = models.find(family);
  models::TrainConfig cfg = it != models.end() ? it->second : models::default_train_config(family);
  cfg.seed = stage_seed("victim");
  return cfg;
}

std::uint64_t RunConfig::stage_seed(std::string_view stage) const { return derive_seed(seed, stage); }

RunConfig parse_config(std::istream& in, const Overrides& overrides,
                       const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }

  std::map<std::string, std::string> entries;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key outside any section: " + section);
    for (const auto& [key, value] : body) entries[section + "." + key] = trim(value.data());
  }
  if (overrides.seed) entries["run.seed"] = std::to_string(*overrides.seed);
  if (overrides.workers) entries["run.workers"] = std::to_string(*overrides.workers);
  if (overrides.out_dir) entries["run.out"] = overrides.out_dir->string();

  RunConfig cfg;
  // Per-family defaults first so partial sections only override what they name.
  for (auto family : {models::Family::wrmf, models::Family::item_ae, models::Family::mult_vae}) {
    cfg.models[family] = models::default_train_config(family);
  }

  auto seed = entries.find("run.seed");
  if (seed == entries.end()) throw ConfigError("run.seed is required");
  cfg.seed = parse_number<std::uint64_t>("run.seed", seed->second);
  if (auto it = entries.find("run.workers"); it != entries.end()) {
    cfg.workers = parse_number<std::size_t>("run.workers", it->second);
  }
  if (auto it = entries.find("run.out"); it != entries.end()) cfg.out_dir = it->second;

  const auto& table = key_table();
  std::ostringstream canonical;
  for (const auto& [key, value] : entries) {
    if (key == "run.seed" || key == "run.workers" || key == "run.out") {
      if (key == "run.seed") canonical << key << '=' << value << '\n';
      continue;
    }
    auto setter = table.find(key);
    if (setter == table.end()) throw ConfigError("unknown config key: " + key);
    setter->second(cfg, key, value);
    canonical << key << '=' << value << '\n';
  }
  cfg.canonical = canonical.str();

  if (cfg.source.path && cfg.source.path->is_relative()) {
    cfg.source.path = base_dir / *cfg.source.path;
  }
  if (cfg.source.path && !std::filesystem::exists(*cfg.source.path)) {
    throw ConfigError("data file not found: " + cfg.source.path->string());
  }
  if (!cfg.source.path) cfg.source.synthetic.seed = cfg.stage_seed("synthetic");

  cfg.attack.workers = cfg.workers;
  cfg.attack.seed = cfg.stage_seed("attack");
  cfg.attack.substitute.seed = cfg.stage_seed("substitute");
  if (cfg.workers == 0) throw ConfigError("run.workers must be >= 1");
  if (cfg.k_list.empty()) throw ConfigError("run.k_list is empty");
  if (cfg.num_clusters == 0) throw ConfigError("targets.num_clusters must be >= 1");
  if (!(cfg.detect.damping > 0.0 && cfg.detect.damping < 1.0)) {
    throw ConfigError("detect.damping must lie in (0,1)");
  }
  try {
    cfg.attack.validate();
    for (const auto& [family, train] : cfg.models) train.validate();
    if (!cfg.source.path) cfg.source.synthetic.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  if (cfg.grid.ratios.empty()) cfg.grid.ratios = {cfg.attack.poisoning_ratio};
  if (cfg.grid.methods.empty()) cfg.grid.methods = {attack::Method::clean, cfg.method};
  if (cfg.grid.victims.empty()) cfg.grid.victims = {cfg.victim};
  if (cfg.grid.buckets.empty()) cfg.grid.buckets = {cfg.bucket};
  if (cfg.grid.modes.empty()) cfg.grid.modes = {cfg.mode};
  if (cfg.grid.seeds.empty()) cfg.grid.seeds = {cfg.seed};
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  return parse_config(in, overrides, path.parent_path().empty() ? "." : path.parent_path());
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

data::InteractionDataset load_source(const DatasetSource& source) {
  data::InteractionDataset raw = source.path ? data::load_interactions(*source.path, source.format)
                                             : generate_synthetic(source.synthetic);
  return data::core_filter(raw, source.min_user, source.min_item);
}

}  // namespace trojanrec::harness
