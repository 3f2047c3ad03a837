#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>
#include <toml.hpp>

#include "measures.hpp"
#include "rate_measure.hpp"

namespace cpplab {

// A missing or malformed entry; key is the dotted path.
struct ConfigError : std::runtime_error {
    std::string key;
    ConfigError(std::string k, const std::string& what) : std::runtime_error(what), key(std::move(k)) {}
};

namespace detail {

inline nlohmann::json toml_to_json(const toml::node& n) {
    if (auto t = n.as_table()) {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
        return j;
    }
    if (auto a = n.as_array()) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& v : *a) j.push_back(toml_to_json(v));
        return j;
    }
    if (auto v = n.as_integer()) return v->get();
    if (auto v = n.as_floating_point()) return v->get();
    if (auto v = n.as_boolean()) return v->get();
    if (auto v = n.as_string()) return v->get();
    throw std::invalid_argument("config: dates and times are not supported");
}

}  // namespace detail

inline nlohmann::json parse_config(const std::string& text, const std::string& source = "config") {
    try {
        return detail::toml_to_json(toml::parse(text, source));
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << source << ":" << e.source().begin.line << ": " << e.description();
        throw std::invalid_argument(msg.str());
    }
}

// Looks up a dotted key such as "bd.horizon".
inline const nlohmann::json& config_node(const nlohmann::json& cfg, const std::string& key) {
    const nlohmann::json* cur = &cfg;
    std::size_t pos = 0;
    while (true) {
        const std::size_t dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (!cur->is_object() || !cur->contains(part)) throw ConfigError(key, "missing config key '" + key + "'");
        cur = &(*cur)[part];
        if (dot == std::string::npos) return *cur;
        pos = dot + 1;
    }
}

template <class T>
T config_get(const nlohmann::json& cfg, const std::string& key) {
    const auto& n = config_node(cfg, key);
    try {
        return n.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(key, "config key '" + key + "' has the wrong type");
    }
}

template <class T>
T config_get(const nlohmann::json& cfg, const std::string& key, T fallback) {
    try {
        config_node(cfg, key);
    } catch (const ConfigError&) {
        return fallback;
    }
    return config_get<T>(cfg, key);
}

inline IntensityMeasure config_nu(const nlohmann::json& cfg, const std::string& key = "nu") {
    const auto& n = config_node(cfg, key);
    config_get<std::string>(cfg, key + ".family");
    try {
        return intensity_from_json(n);
    } catch (const nlohmann::json::out_of_range& e) {
        throw ConfigError(key, "config key '" + key + "' is incomplete: " + e.what());
    }
}

inline MutationMeasure config_mu(const nlohmann::json& cfg, const std::string& key = "mu") {
    const auto& n = config_node(cfg, key);
    config_get<std::string>(cfg, key + ".family");
    try {
        return mutation_from_json(n);
    } catch (const nlohmann::json::out_of_range& e) {
        throw ConfigError(key, "config key '" + key + "' is incomplete: " + e.what());
    }
}

// Rates for birth-death runs: { family = "constant", rate = b } or { family = "zero" }.
inline RateMeasure config_rate(const nlohmann::json& cfg, const std::string& key) {
    const auto fam = config_get<std::string>(cfg, key + ".family");
    if (fam == "constant") return RateMeasure::constant(config_get<double>(cfg, key + ".rate"));
    if (fam == "zero") return RateMeasure::zero();
    throw ConfigError(key, "unknown rate family '" + fam + "' at '" + key + "'");
}

}  // namespace cpplab
