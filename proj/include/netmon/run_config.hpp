#pragma once

#include <filesystem>
#include <string>

#include "netmon/baseline.hpp"

namespace netmon {

// Everything a pipeline run needs: where the data lives and the knobs for
// baseline building, detection, and the geo analytics. Loaded from a JSON
// file; individual command-line flags override single fields afterwards.
struct RunConfig {
  // Locations. Relative paths in a config file resolve against the file's
  // directory.
  std::filesystem::path data_dir = "data";
  std::filesystem::path baseline_dir = "baselines";
  std::filesystem::path rules_file = "rules.json";
  std::filesystem::path geoip_file = "geoip.csv";
  std::filesystem::path whitelist_file;  // optional; empty means none
  std::filesystem::path alerts_file = "alerts.csv";
  std::filesystem::path geo_alerts_file = "geo_alerts.csv";
  std::filesystem::path state_file = "containment.state";
  std::filesystem::path out_dir = "out";

  // Baseline shape.
  int weeks_back = 8;
  int window_minutes = 10;
  double deviation_multiplier = 3.0;
  int resolution_seconds = 60;

  // Detection.
  int grace_minutes = 10;
  int renotify_minutes = 60;
  int lookback_minutes = 60;

  // Geo analytics.
  int sustain_minutes = 30;
  double quantile = 0.99;
  int top_k = 100000;
  int geo_history_days = 7;
  int geo_live_minutes = 60;

  void validate() const;
  BaselineConfig baseline_config() const;
};

// Parses the JSON object in text; unknown keys are an error so typos fail
// loudly. base_dir anchors relative paths.
RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir);

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace netmon
