#pragma once
#include <string>
#include <vector>

#include "qdi/config.hpp"

namespace qdi {

inline constexpr const char* kToolVersion = "qdiff 1.0.0";

// Stages communicate only through serialized artifacts in out_dir, so each
// can run in a separate process. Every stage checks a cache key derived from
// the config keys it depends on and skips recomputation on a match. Each call
// rewrites the manifest over everything currently in out_dir.
//
// Stage names: decompose, couple, image, farfield, specresolve.
void run_stage(const RunConfig& cfg, const std::string& stage, const std::string& out_dir);

// decompose -> couple -> image -> farfield -> specresolve.
void run_pipeline(const RunConfig& cfg, const std::string& out_dir);

// Shared by the CLI `metrics` subcommand and tests: loads two real-image
// files and formats their metrics.
std::string metrics_report(const std::string& img_path, const std::string& ref_path,
                           double half_extent);

void set_thread_count(int threads);

}  // namespace qdi
