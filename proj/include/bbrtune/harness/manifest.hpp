#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

#include "bbrtune/harness/scenario.hpp"
#include "bbrtune/rl/hyper.hpp"
#include "bbrtune/version.hpp"

namespace bbrtune::harness {

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string file_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return hex64(fnv1a64(bytes));
}

inline std::string scenario_hash(const ScenarioSpec& s) { return hex64(fnv1a64(scenario_to_json(s).dump())); }

inline json hyper_to_json(const rl::PpoHyper& h) {
  return {{"gamma", h.gamma},
          {"lambda", h.lambda},
          {"clip_eps", h.clip_eps},
          {"c1", h.c1},
          {"c2", h.c2},
          {"beta_entropy", h.beta_entropy},
          {"learning_rate", h.learning_rate},
          {"epochs", h.epochs},
          {"minibatch", h.minibatch},
          {"n_actors", h.n_actors},
          {"horizon", h.horizon},
          {"max_grad_norm", h.max_grad_norm},
          {"normalize_advantages", h.normalize_advantages}};
}

inline rl::PpoHyper hyper_from_json(const json& j) {
  rl::PpoHyper h;
  try {
    detail::reject_unknown(j,
                           {"gamma", "lambda", "clip_eps", "c1", "c2", "beta_entropy", "learning_rate", "epochs",
                            "minibatch", "n_actors", "horizon", "max_grad_norm", "normalize_advantages"},
                           "hyper");
    detail::get_opt(j, "gamma", h.gamma);
    detail::get_opt(j, "lambda", h.lambda);
    detail::get_opt(j, "clip_eps", h.clip_eps);
    detail::get_opt(j, "c1", h.c1);
    detail::get_opt(j, "c2", h.c2);
    detail::get_opt(j, "beta_entropy", h.beta_entropy);
    detail::get_opt(j, "learning_rate", h.learning_rate);
    detail::get_opt(j, "epochs", h.epochs);
    detail::get_opt(j, "minibatch", h.minibatch);
    detail::get_opt(j, "n_actors", h.n_actors);
    detail::get_opt(j, "horizon", h.horizon);
    detail::get_opt(j, "max_grad_norm", h.max_grad_norm);
    detail::get_opt(j, "normalize_advantages", h.normalize_advantages);
    h.validate();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("hyper: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("hyper: ") + e.what());
  }
  return h;
}

// Applies "key=value" overrides on top of `h`.
inline rl::PpoHyper apply_hyper_override(const rl::PpoHyper& h, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("hyper override must be key=value: " + kv);
  json j = hyper_to_json(h);
  const std::string key = kv.substr(0, eq);
  if (!j.contains(key)) throw ConfigError("unknown hyperparameter '" + key + "'");
  json v;
  try {
    v = json::parse(kv.substr(eq + 1));
  } catch (const json::exception&) {
    throw ConfigError("bad value for " + key);
  }
  j[key] = v;
  return hyper_from_json(j);
}

inline json base_manifest(const std::string& command, const ScenarioSpec& s, std::uint64_t seed) {
  return {{"tool", "bbrtune"},
          {"code_version", kVersion},
          {"command", command},
          {"seed", seed},
          {"scenario_hash", scenario_hash(s)},
          {"scenario", scenario_to_json(s)}};
}

inline json load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open manifest " + path);
  try {
    json j = json::parse(f);
    if (j.value("tool", "") != "bbrtune") throw ConfigError(path + " is not a bbrtune manifest");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << '\n';
}

}  // namespace bbrtune::harness
