#pragma once

// Report emission: the distance series as CSV (shortest round-trip decimals),
// the full report as JSON carrying the exact configuration for replay, and
// flat binary ensemble dumps. All output is deterministic byte-for-byte for a
// fixed report.

#include <cstdint>
#include <fstream>
#include <limits>
#include <string>

#include <json.hpp>

#include "tsde/config.hpp"
#include "tsde/distance.hpp"
#include "tsde/harness.hpp"

namespace tsde {

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

inline nlohmann::json number_json(double v, bool integral) {
  if (integral) return nlohmann::json(static_cast<std::int64_t>(v));
  return nlohmann::json(v);
}

inline nlohmann::json fit_json(const RateFit& f, bool valid) {
  if (!valid) return nullptr;
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"r_squared", f.r_squared},
          {"n_points", f.n_points}};
}

}  // namespace detail

/// The parsed configuration as a flat JSON object, dotted keys preserved.
inline nlohmann::json config_to_json(const Config& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, v] : cfg.entries()) {
    switch (v.kind) {
      case ConfigValue::Kind::number:
        j[key] = detail::number_json(v.number, v.integral);
        break;
      case ConfigValue::Kind::boolean:
        j[key] = v.boolean;
        break;
      case ConfigValue::Kind::string:
        j[key] = v.text;
        break;
      case ConfigValue::Kind::number_list: {
        auto arr = nlohmann::json::array();
        for (std::size_t i = 0; i < v.list.size(); ++i)
          arr.push_back(detail::number_json(v.list[i], v.list_integral[i]));
        j[key] = std::move(arr);
        break;
      }
    }
  }
  return j;
}

/// Rebuilds a Config from the flat JSON object written by config_to_json;
/// round-trips the canonical hash.
inline Config config_from_json(const nlohmann::json& j) {
  Config cfg;
  for (const auto& [key, val] : j.items()) {
    ConfigValue v;
    if (val.is_boolean()) {
      v = ConfigValue::make_bool(val.get<bool>());
    } else if (val.is_string()) {
      v = ConfigValue::make_string(val.get<std::string>());
    } else if (val.is_number()) {
      v = ConfigValue::make_number(val.get<double>(), val.is_number_integer());
    } else if (val.is_array()) {
      v.kind = ConfigValue::Kind::number_list;
      for (const auto& e : val) {
        if (!e.is_number()) throw config_error("config arrays may contain numbers only");
        v.list.push_back(e.get<double>());
        v.list_integral.push_back(e.is_number_integer());
      }
    } else {
      throw config_error("unsupported value type for key '" + key + "'");
    }
    cfg.set(key, std::move(v));
  }
  return cfg;
}

/// distances.csv: header n,t_n,eta_n,w1,w1_se,tv and one row per checkpoint.
inline void write_distances_csv(const ConvergenceReport& rep, const std::string& path) {
  auto out = detail::open_out(path);
  out << "n,t_n,eta_n,w1,w1_se,tv\n";
  for (const auto& r : rep.series) {
    out << r.n << ',' << detail::format_number(r.t_n, false) << ','
        << detail::format_number(r.eta_n, false) << ',' << detail::format_number(r.w1, false)
        << ',' << detail::format_number(r.w1_se, false) << ','
        << detail::format_number(r.tv, false) << '\n';
  }
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

inline nlohmann::json report_to_json(const ConvergenceReport& rep, const Config& raw) {
  nlohmann::json series = nlohmann::json::array();
  for (const auto& r : rep.series)
    series.push_back({{"n", r.n},
                      {"t_n", r.t_n},
                      {"eta_n", r.eta_n},
                      {"w1", r.w1},
                      {"w1_se", r.w1_se},
                      {"tv", r.tv},
                      {"ref_gap", r.ref_gap}});
  nlohmann::json j{
      {"config", config_to_json(raw)},
      {"config_hash", rep.config_hash},
      {"series", std::move(series)},
      {"w1_fit", detail::fit_json(rep.w1_fit, rep.w1_fit_valid)},
      {"tv_fit", detail::fit_json(rep.tv_fit, rep.tv_fit_valid)},
      {"tv_spearman", rep.tv_spearman},
      {"fit_checkpoints", rep.fit_checkpoints},
      {"max_moment", rep.max_moment},
      {"moment_saturated", rep.moment_saturated},
      {"self_consistency_gap", rep.self_consistency_gap},
      {"min_fitted_w1", rep.min_fitted_w1},
      {"diverged", rep.diverged},
      {"flags",
       {{"no_divergence", rep.pass_no_divergence},
        {"w1_slope", rep.pass_w1_slope},
        {"tv_trend", rep.pass_tv_trend},
        {"self_consistency", rep.pass_self_consistency}}},
      {"pass", rep.pass},
  };
  return j;
}

inline nlohmann::json report_to_json(const MomentReport& rep, const Config& raw) {
  nlohmann::json series = nlohmann::json::array();
  for (const auto& r : rep.series)
    series.push_back({{"n", r.n},
                      {"t_n", r.t_n},
                      {"moment", r.moment},
                      {"standard_error", r.standard_error}});
  return nlohmann::json{
      {"config", config_to_json(raw)},
      {"config_hash", rep.config_hash},
      {"series", std::move(series)},
      {"initial_value", rep.initial_value},
      {"lambda_hat", rep.lambda_hat},
      {"c_hat", rep.c_hat},
      {"max_relative_residual", rep.max_relative_residual},
      {"max_moment", rep.max_moment},
      {"diverged", rep.diverged},
      {"saturated", rep.saturated},
      {"pass", rep.pass},
  };
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  nlohmann::json j;
  in >> j;
  return j;
}

// Flat binary ensemble dump: magic "TSDE", u32 version, u32 dim, u64 sample
// count, f64 checkpoint time, then samples row-major as little-endian f64.
inline void write_ensemble_bin(const PathEnsemble& e, const std::string& path) {
  auto out = detail::open_out(path);
  const char magic[4] = {'T', 'S', 'D', 'E'};
  const std::uint32_t version = 1;
  const std::uint32_t dim = std::uint32_t(e.dim);
  const std::uint64_t count = std::uint64_t(e.size());
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  out.write(reinterpret_cast<const char*>(&count), 8);
  out.write(reinterpret_cast<const char*>(&e.checkpoint_time), 8);
  for (std::int64_t i = 0; i < e.size(); ++i)
    for (int jcol = 0; jcol < e.dim; ++jcol) {
      const double v = e.samples(i, jcol);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

inline PathEnsemble read_ensemble_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  char magic[4];
  std::uint32_t version = 0, dim = 0;
  std::uint64_t count = 0;
  PathEnsemble e;
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "TSDE")
    throw std::runtime_error("'" + path + "' is not an ensemble dump");
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw std::runtime_error("'" + path + "': unsupported version");
  in.read(reinterpret_cast<char*>(&dim), 4);
  in.read(reinterpret_cast<char*>(&count), 8);
  in.read(reinterpret_cast<char*>(&e.checkpoint_time), 8);
  e.dim = int(dim);
  e.samples.resize(std::int64_t(count), int(dim));
  for (std::uint64_t i = 0; i < count; ++i)
    for (std::uint32_t jcol = 0; jcol < dim; ++jcol) {
      double v = 0;
      in.read(reinterpret_cast<char*>(&v), 8);
      e.samples(std::int64_t(i), int(jcol)) = v;
    }
  if (!in) throw std::runtime_error("'" + path + "': truncated ensemble dump");
  return e;
}

}  // namespace tsde
