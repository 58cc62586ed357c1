#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wnum/environment.hpp"

namespace wnum::io {

inline constexpr int kEpisodeFormatVersion = 1;

// Context stored next to an exported trajectory.
struct EpisodeMeta {
  std::string method;
  std::int64_t episode_index = 0;
  std::uint64_t base_seed = 0;
  std::uint64_t instance_seed = 0;
  double v_max = 0.8;
  std::string dynamics_model = "holonomic";
};

// Writes <stem>.csv (step,agent_id,px,py,vx,vy,heading,frozen) and the
// <stem>.json sidecar. Returns the sidecar path.
std::filesystem::path export_episode(const std::filesystem::path& dir, const std::string& stem,
                                     const env::EpisodeResult& result, const EpisodeMeta& meta);

struct TrajectoryRow {
  std::int64_t step = 0;
  int agent_id = 0;
  Vec2 position;
  Vec2 velocity;
  double heading = 0.0;
  bool frozen = false;
};

struct LoadedEpisode {
  std::filesystem::path sidecar;
  std::string stored_outcome;
  double dt = 0.1;
  double radius = 0.15;
  int n_agents = 0;
  std::vector<env::PairWinding> stored_winding;
  // positions[k][i] and frozen[k][i], k = 0..steps
  std::vector<std::vector<Vec2>> positions;
  std::vector<std::vector<bool>> frozen;
};

// Accepts either the sidecar or the CSV path. Throws DataError on anything
// missing, malformed or inconsistent.
LoadedEpisode load_episode(const std::filesystem::path& path);

struct ReplayResult {
  env::Outcome outcome = env::Outcome::kTimeout;
  bool outcome_matches = false;
  std::vector<env::PairWinding> final_winding;
  double max_winding_mismatch = 0.0;
};

// Recomputes outcome and cumulative pairwise winding, writing paths.csv and
// winding.csv into out_dir.
ReplayResult replay_episode(const LoadedEpisode& ep, const std::filesystem::path& out_dir);

}  // namespace wnum::io
