#include "netmon/run_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "netmon/time_util.hpp"

namespace netmon {

void RunConfig::validate() const {
  if (weeks_back < 1) throw std::invalid_argument("weeks_back must be at least 1");
  if (window_minutes < 1) throw std::invalid_argument("window_minutes must be at least 1");
  if (deviation_multiplier <= 0)
    throw std::invalid_argument("deviation_multiplier must be positive");
  if (resolution_seconds < 1)
    throw std::invalid_argument("resolution_seconds must be at least 1");
  if (grace_minutes < 1) throw std::invalid_argument("grace_minutes must be at least 1");
  if (renotify_minutes < grace_minutes)
    throw std::invalid_argument("renotify_minutes must be at least grace_minutes");
  if (lookback_minutes < 1)
    throw std::invalid_argument("lookback_minutes must be at least 1");
  if (sustain_minutes < 1)
    throw std::invalid_argument("sustain_minutes must be at least 1");
  if (quantile <= 0 || quantile >= 1)
    throw std::invalid_argument("quantile must be in (0, 1)");
  if (top_k < 1) throw std::invalid_argument("top_k must be at least 1");
  if (geo_history_days < 1)
    throw std::invalid_argument("geo_history_days must be at least 1");
  if (geo_live_minutes < 1)
    throw std::invalid_argument("geo_live_minutes must be at least 1");
}

BaselineConfig RunConfig::baseline_config() const {
  BaselineConfig cfg;
  cfg.weeks_back = weeks_back;
  cfg.window = static_cast<std::int64_t>(window_minutes) * kSecondsPerMinute;
  cfg.resolution = resolution_seconds;
  cfg.deviation_multiplier = deviation_multiplier;
  cfg.validate();
  return cfg;
}

RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  if (!doc.is_object()) throw std::runtime_error("config must be a JSON object");

  RunConfig cfg;
  auto path_field = [&](const char* key, std::filesystem::path& out) {
    if (!doc.contains(key)) return;
    const std::filesystem::path p = doc[key].get<std::string>();
    out = p.is_absolute() ? p : base_dir / p;
  };
  auto int_field = [&](const char* key, int& out) {
    if (doc.contains(key)) out = doc[key].get<int>();
  };
  auto double_field = [&](const char* key, double& out) {
    if (doc.contains(key)) out = doc[key].get<double>();
  };

  static const char* known[] = {
      "data_dir",         "baseline_dir",     "rules_file",
      "geoip_file",       "whitelist_file",   "alerts_file",
      "geo_alerts_file",  "state_file",       "out_dir",
      "weeks_back",       "window_minutes",   "deviation_multiplier",
      "resolution_seconds", "grace_minutes",  "renotify_minutes",
      "lookback_minutes", "sustain_minutes",  "quantile",
      "top_k",            "geo_history_days", "geo_live_minutes",
  };
  for (const auto& [key, value] : doc.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::runtime_error("unknown config key: " + key);
  }

  path_field("data_dir", cfg.data_dir);
  path_field("baseline_dir", cfg.baseline_dir);
  path_field("rules_file", cfg.rules_file);
  path_field("geoip_file", cfg.geoip_file);
  path_field("whitelist_file", cfg.whitelist_file);
  path_field("alerts_file", cfg.alerts_file);
  path_field("geo_alerts_file", cfg.geo_alerts_file);
  path_field("state_file", cfg.state_file);
  path_field("out_dir", cfg.out_dir);

  int_field("weeks_back", cfg.weeks_back);
  int_field("window_minutes", cfg.window_minutes);
  double_field("deviation_multiplier", cfg.deviation_multiplier);
  int_field("resolution_seconds", cfg.resolution_seconds);
  int_field("grace_minutes", cfg.grace_minutes);
  int_field("renotify_minutes", cfg.renotify_minutes);
  int_field("lookback_minutes", cfg.lookback_minutes);
  int_field("sustain_minutes", cfg.sustain_minutes);
  double_field("quantile", cfg.quantile);
  int_field("top_k", cfg.top_k);
  int_field("geo_history_days", cfg.geo_history_days);
  int_field("geo_live_minutes", cfg.geo_live_minutes);

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.parent_path());
}

}  // namespace netmon
