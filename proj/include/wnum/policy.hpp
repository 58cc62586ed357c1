#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wnum::planner {

inline constexpr int kSelfFeatures = 7;
inline constexpr int kNeighborFeatures = 7;
inline constexpr int kOutputsPerSlot = 2;
inline constexpr int kPolicyFormatVersion = 1;

// Shape of the planner network: a tanh MLP trunk shared by a Gaussian
// policy head (two outputs per neighbour slot) and a scalar value head.
struct Architecture {
  int n_max = 8;
  std::vector<int> hidden{64, 64};
  std::string activation = "tanh";
  // Output squashing: target = w_max * tanh(x), weight = weight_scale * softplus(x).
  double w_max = 1.0;
  double weight_scale = 10.0;

  int slots() const { return n_max - 1; }
  int input_size() const { return kSelfFeatures + slots() * (kNeighborFeatures + 1); }
  int policy_outputs() const { return slots() * kOutputsPerSlot; }
  std::size_t parameter_count() const;
  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Bookkeeping carried inside checkpoint files.
struct TrainingStamp {
  std::int64_t iteration = 0;
  std::int64_t env_steps = 0;
  std::uint64_t seed = 0;
  friend bool operator==(const TrainingStamp&, const TrainingStamp&) = default;
};

struct PolicyParams {
  Architecture arch;
  // Trunk layers (W row-major out x in, then b), policy head, value head.
  std::vector<double> weights;
  // State-independent log standard deviation per policy output.
  std::vector<double> log_std;
  std::optional<TrainingStamp> training;

  std::size_t size() const { return weights.size() + log_std.size(); }
  void validate() const;
};

struct InitOptions {
  double log_std = -0.6931471805599453;  // ln(0.5)
  double policy_head_scale = 0.01;
  // Initial mean of the squashed per-neighbour weight.
  double initial_weight = 1.0;
  double initial_target = 0.0;
};

PolicyParams zero_params(const Architecture& arch);
PolicyParams init_params(const Architecture& arch, std::uint64_t seed, const InitOptions& opts = {});

// Activations kept for the backward pass.
struct ForwardCache {
  std::vector<double> input;
  std::vector<std::vector<double>> layers;  // post-activation, one per hidden layer
};

struct ForwardResult {
  std::vector<double> means;
  std::vector<double> log_std;
  double value = 0.0;
};

// Raw MLP pass on a flat input vector (length arch.input_size()).
ForwardResult forward_raw(const PolicyParams& p, std::span<const double> input,
                          ForwardCache* cache = nullptr);

// Accumulates d(loss)/d(weights) into grad_weights given the output
// gradients d(loss)/d(means) and d(loss)/d(value).
void backward_raw(const PolicyParams& p, const ForwardCache& cache,
                  std::span<const double> grad_means, double grad_value,
                  std::span<double> grad_weights);

// File IO. JSON is human readable; the binary form stores the same header as
// JSON followed by little-endian float64 payload.
void save_json(const PolicyParams& p, const std::filesystem::path& path);
void save_binary(const PolicyParams& p, const std::filesystem::path& path);
PolicyParams load_params(const std::filesystem::path& path);
std::string to_json_string(const PolicyParams& p);
PolicyParams from_json_string(const std::string& text);

}  // namespace wnum::planner
