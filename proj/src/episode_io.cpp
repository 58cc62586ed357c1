#include "wnum/episode_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "wnum/errors.hpp"
#include "wnum/topology.hpp"

namespace wnum::io {

using nlohmann::json;

namespace {

json nullable(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json point(Vec2 p) { return json::array({p.x, p.y}); }

std::string num(double x) { return fmt::format("{:.17g}", x); }

}  // namespace

std::filesystem::path export_episode(const std::filesystem::path& dir, const std::string& stem,
                                     const env::EpisodeResult& result, const EpisodeMeta& meta) {
  std::filesystem::create_directories(dir);
  const auto csv_path = dir / (stem + ".csv");
  const auto json_path = dir / (stem + ".json");
  {
    std::ofstream f(csv_path, std::ios::binary);
    if (!f) throw DataError("cannot write " + csv_path.string());
    f << "step,agent_id,px,py,vx,vy,heading,frozen\n";
    for (std::size_t k = 0; k < result.trajectory.size(); ++k) {
      for (std::size_t i = 0; i < result.trajectory[k].size(); ++i) {
        const AgentState& s = result.trajectory[k][i];
        f << k << ',' << i << ',' << num(s.position.x) << ',' << num(s.position.y) << ','
          << num(s.velocity.x) << ',' << num(s.velocity.y) << ',' << num(s.heading) << ','
          << (result.frozen[k][i] ? 1 : 0) << '\n';
      }
    }
  }

  json j;
  j["format"] = "wnummpc-episode";
  j["format_version"] = kEpisodeFormatVersion;
  j["trajectory_file"] = csv_path.filename().string();
  j["method"] = meta.method;
  j["episode_index"] = meta.episode_index;
  j["seeds"] = {{"base", meta.base_seed}, {"instance", meta.instance_seed}};
  const env::Instance& inst = result.instance;
  json starts = json::array(), goals = json::array();
  for (const Vec2& p : inst.starts) starts.push_back(point(p));
  for (const Vec2& p : inst.goals) goals.push_back(point(p));
  j["instance"] = {{"mode", std::string(env::to_string(inst.mode))},
                   {"n_agents", inst.size()},
                   {"radius", inst.radius},
                   {"starts", starts},
                   {"goals", goals}};
  j["dynamics"] = {{"model", meta.dynamics_model}, {"dt", result.dt}, {"v_max", meta.v_max}};
  j["outcome"] = std::string(env::to_string(result.outcome));
  j["steps"] = result.steps;
  if (result.collision_pair) {
    j["collision"] = {{"pair", {result.collision_pair->first, result.collision_pair->second}},
                      {"step", result.collision_step}};
  } else {
    j["collision"] = nullptr;
  }
  json arrivals = json::array();
  for (double t : result.arrival_time) arrivals.push_back(nullable(t));
  j["metrics"] = {{"extra_time", nullable(result.extra_time)}, {"arrival_times", arrivals}};
  json wind = json::array();
  for (const env::PairWinding& w : result.realized_winding) {
    wind.push_back({{"i", w.i}, {"j", w.j}, {"w", w.w}});
  }
  j["realized_winding"] = wind;

  std::ofstream f(json_path, std::ios::binary);
  if (!f) throw DataError("cannot write " + json_path.string());
  f << j.dump(2) << '\n';
  return json_path;
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError("malformed number '" + s + "' in " + where);
  }
  if (used != s.size() || !std::isfinite(v)) {
    throw DataError("malformed number '" + s + "' in " + where);
  }
  return v;
}

long long parse_int(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw DataError("malformed integer '" + s + "' in " + where);
  }
  if (used != s.size()) throw DataError("malformed integer '" + s + "' in " + where);
  return v;
}

}  // namespace

LoadedEpisode load_episode(const std::filesystem::path& path) {
  LoadedEpisode ep;
  ep.sidecar = path;
  if (path.extension() == ".csv") ep.sidecar.replace_extension(".json");
  std::ifstream jf(ep.sidecar);
  if (!jf) throw DataError("cannot open episode sidecar " + ep.sidecar.string());
  json j;
  std::string trajectory_file;
  try {
    j = json::parse(jf);
    if (j.at("format").get<std::string>() != "wnummpc-episode") throw DataError("not an episode file");
    if (j.at("format_version").get<int>() != kEpisodeFormatVersion) {
      throw DataError("unsupported episode format version");
    }
    trajectory_file = j.at("trajectory_file").get<std::string>();
    ep.stored_outcome = j.at("outcome").get<std::string>();
    env::parse_outcome(ep.stored_outcome);
    ep.dt = j.at("dynamics").at("dt").get<double>();
    ep.radius = j.at("instance").at("radius").get<double>();
    ep.n_agents = j.at("instance").at("n_agents").get<int>();
    for (const auto& w : j.at("realized_winding")) {
      ep.stored_winding.push_back({w.at("i").get<int>(), w.at("j").get<int>(), w.at("w").get<double>()});
    }
  } catch (const json::exception& e) {
    throw DataError("corrupt episode sidecar " + ep.sidecar.string() + ": " + e.what());
  }
  if (ep.n_agents < 1) throw DataError("episode has no agents");

  const auto csv_path = ep.sidecar.parent_path() / trajectory_file;
  std::ifstream cf(csv_path);
  if (!cf) throw DataError("cannot open trajectory " + csv_path.string());
  std::string line;
  if (!std::getline(cf, line) || line != "step,agent_id,px,py,vx,vy,heading,frozen") {
    throw DataError("trajectory " + csv_path.string() + " has a missing or unexpected header");
  }
  const auto n = static_cast<std::size_t>(ep.n_agents);
  std::size_t row_no = 1;
  std::size_t next_agent = 0;
  while (std::getline(cf, line)) {
    ++row_no;
    if (line.empty()) continue;
    const std::string where = csv_path.filename().string() + ":" + std::to_string(row_no);
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw DataError("expected 8 columns at " + where);
    const long long k = parse_int(cells[0], where);
    const long long i = parse_int(cells[1], where);
    if (i < 0 || static_cast<std::size_t>(i) >= n) throw DataError("agent id out of range at " + where);
    const long long expected_step = static_cast<long long>(ep.positions.size()) - (i == 0 ? 0 : 1);
    if (static_cast<std::size_t>(i) != next_agent || k != expected_step) {
      throw DataError("rows out of order at " + where);
    }
    next_agent = (next_agent + 1) % n;
    if (i == 0) {
      ep.positions.emplace_back(n);
      ep.frozen.emplace_back(n, false);
    }
    const Vec2 p{parse_double(cells[2], where), parse_double(cells[3], where)};
    parse_double(cells[4], where);
    parse_double(cells[5], where);
    parse_double(cells[6], where);
    const long long fz = parse_int(cells[7], where);
    if (fz != 0 && fz != 1) throw DataError("frozen flag must be 0 or 1 at " + where);
    ep.positions.back()[static_cast<std::size_t>(i)] = p;
    ep.frozen.back()[static_cast<std::size_t>(i)] = fz == 1;
  }
  if (next_agent != 0) throw DataError("trajectory " + csv_path.string() + " ends mid-step");
  if (ep.positions.empty()) throw DataError("trajectory " + csv_path.string() + " is empty");
  return ep;
}

ReplayResult replay_episode(const LoadedEpisode& ep, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::size_t n = static_cast<std::size_t>(ep.n_agents);
  const std::size_t steps = ep.positions.size();

  std::vector<std::vector<Vec2>> paths(n);
  for (const auto& snap : ep.positions) {
    for (std::size_t i = 0; i < n; ++i) paths[i].push_back(snap[i]);
  }

  ReplayResult res;
  bool collided = false;
  for (const auto& snap : ep.positions) {
    for (std::size_t i = 0; i < n && !collided; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (norm(snap[i] - snap[j]) <= 2.0 * ep.radius) {
          collided = true;
          break;
        }
      }
    }
    if (collided) break;
  }
  const auto& last = ep.frozen.back();
  if (collided) {
    res.outcome = env::Outcome::kCollision;
  } else if (std::all_of(last.begin(), last.end(), [](bool f) { return f; })) {
    res.outcome = env::Outcome::kSuccess;
  } else {
    res.outcome = env::Outcome::kTimeout;
  }
  res.outcome_matches = env::to_string(res.outcome) == ep.stored_outcome;

  {
    std::ofstream f(out_dir / "paths.csv", std::ios::binary);
    f << "agent_id,step,t,x,y\n";
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < steps; ++k) {
        f << i << ',' << k << ',' << num(static_cast<double>(k) * ep.dt) << ','
          << num(paths[i][k].x) << ',' << num(paths[i][k].y) << '\n';
      }
    }
  }
  std::ofstream f(out_dir / "winding.csv", std::ios::binary);
  f << "i,j,step,t,w\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double w = 0.0;
      for (std::size_t k = 0; k < steps; ++k) {
        w = topology::winding_number(std::span(paths[i]).first(k + 1),
                                     std::span(paths[j]).first(k + 1));
        f << i << ',' << j << ',' << k << ',' << num(static_cast<double>(k) * ep.dt) << ','
          << num(w) << '\n';
      }
      res.final_winding.push_back({static_cast<int>(i), static_cast<int>(j), w});
      for (const env::PairWinding& s : ep.stored_winding) {
        if (s.i == static_cast<int>(i) && s.j == static_cast<int>(j)) {
          res.max_winding_mismatch = std::max(res.max_winding_mismatch, std::abs(s.w - w));
        }
      }
    }
  }
  return res;
}

}  // namespace wnum::io
