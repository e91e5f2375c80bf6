#pragma once

// Configuration documents: strict JSON schema with defaults, client model
// ingestion, config hashing and CSV headers.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "das/core.hpp"

namespace das {

/// Schema violation: unknown key, wrong type, out-of-range value, bad JSON.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Leaves are {"type", "default"} with optional "min", "max", "enum" and
/// "nullable"; inner objects are sections. "clients" is checked separately.
inline const nlohmann::json& config_schema() {
  static const nlohmann::json schema = nlohmann::json::parse(R"({
    "seed": {"type": "integer", "default": 1, "min": 0},
    "solver": {
      "discount": {"type": "number", "default": 0.99, "min": 0, "max": 1},
      "tol": {"type": "number", "default": 1e-9, "min": 0},
      "max_iterations": {"type": "integer", "default": 1000000, "min": 1},
      "price": {"type": "number", "default": 0.0, "min": 0}
    },
    "pricing": {
      "budget": {"type": "number", "default": null, "nullable": true, "min": 0},
      "step_scale": {"type": "number", "default": 1.0, "min": 0},
      "step_offset": {"type": "number", "default": 10.0, "min": 0},
      "max_iterations": {"type": "integer", "default": 5000, "min": 1},
      "tol": {"type": "number", "default": 1e-7, "min": 0},
      "window": {"type": "integer", "default": 50, "min": 1},
      "time_sharing": {"type": "boolean", "default": true}
    },
    "whittle": {
      "grid_points": {"type": "integer", "default": 50, "min": 2},
      "price_max": {"type": "number", "default": null, "nullable": true, "min": 0},
      "tol": {"type": "number", "default": 1e-6, "min": 0}
    },
    "learning": {
      "algorithm": {"type": "string", "default": "relative",
                    "enum": ["relative", "discounted", "index", "two_timescale"]},
      "steps": {"type": "integer", "default": 1000000, "min": 1},
      "price": {"type": "number", "default": 0.0, "min": 0},
      "discount": {"type": "number", "default": 0.99, "min": 0, "max": 1},
      "budget": {"type": "number", "default": null, "nullable": true, "min": 0},
      "channels": {"type": "integer", "default": 1, "min": 1},
      "log_every": {"type": "integer", "default": 1000, "min": 0},
      "learning_exponent": {"type": "number", "default": 0.7},
      "price_exponent": {"type": "number", "default": 0.85},
      "price_scale": {"type": "number", "default": 1.0},
      "temperature_scale": {"type": "number", "default": 1.0},
      "epsilon_scale": {"type": "number", "default": null, "nullable": true, "min": 0},
      "epsilon_exponent": {"type": "number", "default": null, "nullable": true, "min": 0, "max": 1}
    },
    "simulation": {
      "policy": {"type": "string", "default": "optimal", "enum": ["optimal", "price", "whittle", "separable"]},
      "mode": {"type": "string", "default": "none", "enum": ["none", "average_power", "channels", "peak_power"]},
      "horizon": {"type": "integer", "default": 1000000, "min": 1},
      "price": {"type": "number", "default": 0.0, "min": 0},
      "power_budget": {"type": "number", "default": null, "nullable": true, "min": 0},
      "channels": {"type": "integer", "default": 1, "min": 1},
      "peak_power": {"type": "number", "default": null, "nullable": true, "min": 0},
      "batches": {"type": "integer", "default": 30, "min": 2},
      "record_slots": {"type": "boolean", "default": false}
    },
    "output": {
      "dir": {"type": "string", "default": "."}
    }
  })");
  return schema;
}

struct ClientEntry {
  ClientModel model;
  std::optional<ChannelModel> channel;
  int initial_channel = 0;
  /// Transmit action for binary (index) use of a multi-action client.
  std::optional<Action> transmit;
};

struct Config {
  /// Resolved document: every schema key present, defaults filled in.
  nlohmann::json doc;
  std::vector<ClientEntry> clients;

  std::uint64_t seed() const { return doc.at("seed").get<std::uint64_t>(); }
  const nlohmann::json& section(const char* name) const { return doc.at(name); }
  std::vector<ClientModel> models() const {
    std::vector<ClientModel> out;
    for (const auto& c : clients) out.push_back(c.model);
    return out;
  }
  bool any_fading() const {
    for (const auto& c : clients) {
      if (c.channel) return true;
    }
    return false;
  }
};

namespace detail {

inline bool is_leaf(const nlohmann::json& node) { return node.contains("type") && node.at("type").is_string(); }

inline void check_leaf(const nlohmann::json& v, const nlohmann::json& rule, const std::string& path) {
  if (v.is_null()) {
    if (rule.value("nullable", false)) return;
    throw ConfigError(path + ": must not be null");
  }
  const std::string type = rule.at("type");
  bool ok = false;
  if (type == "number") ok = v.is_number();
  if (type == "integer") ok = v.is_number_integer();
  if (type == "boolean") ok = v.is_boolean();
  if (type == "string") ok = v.is_string();
  if (!ok) throw ConfigError(path + ": expected " + type);
  if (v.is_number()) {
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(path + ": must be finite");
    if (rule.contains("min") && x < rule.at("min").get<double>()) {
      throw ConfigError(path + ": below minimum " + rule.at("min").dump());
    }
    if (rule.contains("max") && x > rule.at("max").get<double>()) {
      throw ConfigError(path + ": above maximum " + rule.at("max").dump());
    }
  }
  if (rule.contains("enum")) {
    for (const auto& e : rule.at("enum")) {
      if (e == v) return;
    }
    throw ConfigError(path + ": must be one of " + rule.at("enum").dump());
  }
}

inline nlohmann::json resolve_section(const nlohmann::json& given, const nlohmann::json& schema,
                                      const std::string& path) {
  if (!given.is_object()) throw ConfigError((path.empty() ? "document" : path) + ": expected an object");
  for (const auto& [key, _] : given.items()) {
    if (path.empty() && key == "clients") continue;
    if (!schema.contains(key)) throw ConfigError((path.empty() ? "" : path + ".") + key + ": unknown key");
  }
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, rule] : schema.items()) {
    const std::string p = path.empty() ? key : path + "." + key;
    if (is_leaf(rule)) {
      if (given.contains(key)) {
        check_leaf(given.at(key), rule, p);
        out[key] = given.at(key);
      } else {
        out[key] = rule.at("default");
      }
    } else {
      out[key] = resolve_section(given.value(key, nlohmann::json::object()), rule, p);
    }
  }
  return out;
}

inline void only_keys(const nlohmann::json& obj, std::initializer_list<const char*> keys, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ConfigError(path + "." + key + ": unknown key");
  }
}

template <typename T>
T field(const nlohmann::json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) throw ConfigError(path + "." + key + ": required");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

inline SuccessTable read_table(const nlohmann::json& rows, int qualities, int powers, const std::string& path) {
  if (!rows.is_array() || static_cast<int>(rows.size()) != qualities) {
    throw ConfigError(path + ": expected " + std::to_string(qualities) + " rows (one per quality)");
  }
  std::vector<double> flat;
  for (std::size_t q = 0; q < rows.size(); ++q) {
    const auto& row = rows[q];
    if (!row.is_array() || static_cast<int>(row.size()) != powers) {
      throw ConfigError(path + ": expected " + std::to_string(powers) + " columns (one per power level)");
    }
    for (const auto& v : row) {
      if (!v.is_number()) throw ConfigError(path + ": entries must be numbers");
      flat.push_back(v.get<double>());
    }
  }
  return SuccessTable(qualities, powers, std::move(flat));
}

inline ClientEntry read_client(const nlohmann::json& j, const std::string& path) {
  only_keys(j,
            {"buffer_capacity", "playtime_per_packet", "quality_disutilities", "power_levels", "success_prob",
             "outage_period_weight", "transmit", "channel"},
            path);
  ClientEntry c;
  auto& m = c.model;
  m.buffer_capacity = field<int>(j, "buffer_capacity", path);
  m.playtime_per_packet = field<int>(j, "playtime_per_packet", path);
  m.quality_disutilities = field<std::vector<double>>(j, "quality_disutilities", path);
  m.power_levels = field<std::vector<double>>(j, "power_levels", path);
  if (m.quality_disutilities.empty() || m.power_levels.empty()) {
    throw ConfigError(path + ": at least one quality and one power level required");
  }
  if (!j.contains("success_prob")) throw ConfigError(path + ".success_prob: required");
  m.success_prob = read_table(j.at("success_prob"), m.qualities(), m.powers(), path + ".success_prob");
  m.outage_period_weight = j.contains("outage_period_weight")
                               ? field<double>(j, "outage_period_weight", path)
                               : 0.0;
  if (j.contains("transmit")) {
    const auto& t = j.at("transmit");
    only_keys(t, {"quality", "power"}, path + ".transmit");
    c.transmit = Action{field<int>(t, "quality", path + ".transmit"), field<int>(t, "power", path + ".transmit")};
  }
  if (j.contains("channel")) {
    const auto& ch = j.at("channel");
    const std::string cp = path + ".channel";
    only_keys(ch, {"transition", "success", "initial_state"}, cp);
    ChannelModel model;
    model.transition = field<std::vector<std::vector<double>>>(ch, "transition", cp);
    if (!ch.contains("success") || !ch.at("success").is_array()) throw ConfigError(cp + ".success: required array");
    for (std::size_t s = 0; s < ch.at("success").size(); ++s) {
      model.per_state_success.push_back(read_table(ch.at("success")[s], m.qualities(), m.powers(),
                                                   cp + ".success[" + std::to_string(s) + "]"));
    }
    c.initial_channel = ch.contains("initial_state") ? field<int>(ch, "initial_state", cp) : 0;
    c.channel = std::move(model);
  }
  return c;
}

}  // namespace detail

/// Parses and schema-checks a document. Client models are read but not
/// validated (see validate_clients), so `verify` can report bad models.
inline Config parse_config(const nlohmann::json& doc) {
  Config cfg;
  cfg.doc = detail::resolve_section(doc, config_schema(), "");
  if (!doc.contains("clients") || !doc.at("clients").is_array() || doc.at("clients").empty()) {
    throw ConfigError("clients: required non-empty array");
  }
  const auto& clients = doc.at("clients");
  try {
    for (std::size_t i = 0; i < clients.size(); ++i) {
      cfg.clients.push_back(detail::read_client(clients[i], "clients[" + std::to_string(i) + "]"));
    }
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
  cfg.doc["clients"] = clients;
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

/// Per-client validation messages; empty when every model is valid.
inline std::vector<std::string> client_problems(const Config& cfg) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < cfg.clients.size(); ++i) {
    const auto& c = cfg.clients[i];
    const std::string who = "client " + std::to_string(i + 1) + ": ";
    try {
      c.model.validate();
      if (c.transmit) c.model.check_action(*c.transmit);
      if (c.channel) {
        c.channel->validate(c.model);
        if (c.initial_channel < 0 || c.initial_channel >= c.channel->states()) {
          throw ModelError("initial channel state out of range");
        }
      }
    } catch (const ModelError& e) {
      out.push_back(who + e.what());
    }
  }
  return out;
}

inline void validate_clients(const Config& cfg) {
  const auto problems = client_problems(cfg);
  if (!problems.empty()) throw ConfigError(problems.front());
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the resolved document without the seed, as 16 hex digits.
inline std::string config_hash(const Config& cfg) {
  auto doc = cfg.doc;
  doc.erase("seed");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(doc.dump())));
  return buf;
}

inline void write_csv_header(std::ostream& os, const std::string& kind, const std::string& hash,
                             std::uint64_t seed) {
  os << "# das-index " << kind << " version 1 config " << hash << " seed " << seed << '\n';
}

}  // namespace das
