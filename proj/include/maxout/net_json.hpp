#pragma once

// JSON serialization of networks:
//   {"n0":…, "widths":[…], "rank":…, "out_dim":…,
//    "hidden":[layer][unit][feature]{"w":[…],"b":…},
//    "output":{"W":[[…]],"b":[…]}}
// Doubles are written in shortest round-trip form, so save/load is bit-stable.

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "maxout/error.hpp"
#include "maxout/net.hpp"

namespace maxout {

using json = nlohmann::json;

inline json architecture_to_json(const Architecture& arch) {
  return {{"n0", arch.n0}, {"widths", arch.widths}, {"rank", arch.rank}, {"out_dim", arch.out_dim}};
}

inline json network_to_json(const Network& net) {
  const auto& arch = net.arch();
  const auto& p = net.params();
  json doc = architecture_to_json(arch);
  json hidden = json::array();
  for (int l = 0; l < arch.depth(); ++l) {
    json layer = json::array();
    for (int u = 0; u < arch.widths[l]; ++u) {
      json unit = json::array();
      for (int k = 0; k < arch.rank; ++k) {
        const long row = static_cast<long>(u) * arch.rank + k;
        std::vector<double> w(p.hidden[l].weights.cols());
        for (long j = 0; j < p.hidden[l].weights.cols(); ++j) w[j] = p.hidden[l].weights(row, j);
        unit.push_back({{"w", w}, {"b", p.hidden[l].biases(row)}});
      }
      layer.push_back(std::move(unit));
    }
    hidden.push_back(std::move(layer));
  }
  doc["hidden"] = std::move(hidden);
  json W = json::array();
  for (long i = 0; i < p.out_weights.rows(); ++i) {
    std::vector<double> row(p.out_weights.cols());
    for (long j = 0; j < p.out_weights.cols(); ++j) row[j] = p.out_weights(i, j);
    W.push_back(row);
  }
  std::vector<double> b(p.out_biases.data(), p.out_biases.data() + p.out_biases.size());
  doc["output"] = {{"W", std::move(W)}, {"b", std::move(b)}};
  return doc;
}

namespace detail {

inline const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key))
    throw Error(ErrorKind::Config, "network schema: missing '" + std::string(key) + "' at " + path);
  return obj.at(key);
}

inline int require_int(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_integer())
    throw Error(ErrorKind::Config, "network schema: " + path + "." + key + " must be an integer");
  return v.get<int>();
}

inline double require_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw Error(ErrorKind::Config, "network schema: " + path + " must be a number");
  return v.get<double>();
}

inline void require_array(const json& v, std::size_t size, const std::string& path) {
  if (!v.is_array() || v.size() != size)
    throw Error(ErrorKind::Config,
                "network schema: " + path + " must be an array of length " + std::to_string(size));
}

}  // namespace detail

inline Architecture architecture_from_json(const json& doc) {
  Architecture arch;
  arch.n0 = detail::require_int(doc, "n0", "$");
  const json& widths = detail::require(doc, "widths", "$");
  if (!widths.is_array()) throw Error(ErrorKind::Config, "network schema: $.widths must be an array");
  for (std::size_t l = 0; l < widths.size(); ++l) {
    if (!widths[l].is_number_integer())
      throw Error(ErrorKind::Config, "network schema: $.widths[" + std::to_string(l) + "] must be an integer");
    arch.widths.push_back(widths[l].get<int>());
  }
  arch.rank = detail::require_int(doc, "rank", "$");
  arch.out_dim = detail::require_int(doc, "out_dim", "$");
  try {
    arch.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, std::string("network schema: ") + e.what());
  }
  return arch;
}

inline Network network_from_json(const json& doc) {
  using detail::require_array;
  using detail::require_number;
  const Architecture arch = architecture_from_json(doc);
  Parameters p = Parameters::zeros(arch);

  const json& hidden = detail::require(doc, "hidden", "$");
  require_array(hidden, arch.widths.size(), "$.hidden");
  for (int l = 0; l < arch.depth(); ++l) {
    const std::string lp = "$.hidden[" + std::to_string(l) + "]";
    require_array(hidden[l], arch.widths[l], lp);
    for (int u = 0; u < arch.widths[l]; ++u) {
      const std::string up = lp + "[" + std::to_string(u) + "]";
      require_array(hidden[l][u], arch.rank, up);
      for (int k = 0; k < arch.rank; ++k) {
        const std::string fp = up + "[" + std::to_string(k) + "]";
        const json& feat = hidden[l][u][k];
        const json& w = detail::require(feat, "w", fp);
        require_array(w, arch.fan_in(l), fp + ".w");
        const long row = static_cast<long>(u) * arch.rank + k;
        for (int j = 0; j < arch.fan_in(l); ++j)
          p.hidden[l].weights(row, j) = require_number(w[j], fp + ".w[" + std::to_string(j) + "]");
        p.hidden[l].biases(row) = require_number(detail::require(feat, "b", fp), fp + ".b");
      }
    }
  }

  const json& out = detail::require(doc, "output", "$");
  const json& W = detail::require(out, "W", "$.output");
  require_array(W, arch.out_dim, "$.output.W");
  for (int i = 0; i < arch.out_dim; ++i) {
    const std::string rp = "$.output.W[" + std::to_string(i) + "]";
    require_array(W[i], arch.last_width(), rp);
    for (int j = 0; j < arch.last_width(); ++j)
      p.out_weights(i, j) = require_number(W[i][j], rp + "[" + std::to_string(j) + "]");
  }
  const json& b = detail::require(out, "b", "$.output");
  require_array(b, arch.out_dim, "$.output.b");
  for (int i = 0; i < arch.out_dim; ++i)
    p.out_biases(i) = require_number(b[i], "$.output.b[" + std::to_string(i) + "]");

  try {
    return Network(arch, std::move(p));
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, std::string("network schema: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
}

inline Network load_network(const std::string& path) {
  try {
    return network_from_json(read_json_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    throw Error(e.kind(), path + ": " + e.what());
  }
}

inline void save_network(const Network& net, const std::string& path, const json& extra = json::object()) {
  json doc = network_to_json(net);
  for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = it.value();
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << doc.dump() << '\n';
}

}  // namespace maxout
