#include "wnum/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "wnum/errors.hpp"
#include "wnum/seeding.hpp"

namespace wnum::planner {

using nlohmann::json;

namespace {

struct Layout {
  std::vector<int> sizes;  // input, hidden...
  std::vector<std::size_t> w_off;
  std::vector<std::size_t> b_off;
  std::size_t policy_w = 0, policy_b = 0, value_w = 0, value_b = 0, total = 0;
  int outputs = 0;

  int last() const { return sizes.back(); }
};

Layout layout_of(const Architecture& a) {
  Layout l;
  l.sizes.push_back(a.input_size());
  for (int h : a.hidden) l.sizes.push_back(h);
  l.outputs = a.policy_outputs();
  std::size_t off = 0;
  for (std::size_t i = 1; i < l.sizes.size(); ++i) {
    l.w_off.push_back(off);
    off += static_cast<std::size_t>(l.sizes[i]) * static_cast<std::size_t>(l.sizes[i - 1]);
    l.b_off.push_back(off);
    off += static_cast<std::size_t>(l.sizes[i]);
  }
  l.policy_w = off;
  off += static_cast<std::size_t>(l.outputs) * static_cast<std::size_t>(l.last());
  l.policy_b = off;
  off += static_cast<std::size_t>(l.outputs);
  l.value_w = off;
  off += static_cast<std::size_t>(l.last());
  l.value_b = off;
  off += 1;
  l.total = off;
  return l;
}

// y = W x + b for a row-major out x in block.
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> y) {
  const std::size_t in = x.size();
  for (std::size_t o = 0; o < y.size(); ++o) {
    const double* row = w.data() + o * in;
    double acc = b[o];
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

}  // namespace

std::size_t Architecture::parameter_count() const { return layout_of(*this).total; }

void Architecture::validate() const {
  if (n_max < 2) throw ConfigError("planner.n_max must be >= 2");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("planner hidden layer sizes must be >= 1");
  }
  if (activation != "tanh") throw ConfigError("unsupported activation '" + activation + "'");
  if (!(w_max > 0.0) || !(weight_scale > 0.0)) {
    throw ConfigError("planner.w_max and planner.weight_scale must be > 0");
  }
}

void PolicyParams::validate() const {
  arch.validate();
  if (weights.size() != arch.parameter_count()) {
    throw ShapeError("policy parameter count " + std::to_string(weights.size()) +
                     " does not match architecture (" + std::to_string(arch.parameter_count()) +
                     ")");
  }
  if (log_std.size() != static_cast<std::size_t>(arch.policy_outputs())) {
    throw ShapeError("policy log_std length does not match architecture");
  }
  for (double v : log_std) {
    if (!std::isfinite(v)) throw NumericalError("policy log_std is not finite");
  }
}

PolicyParams zero_params(const Architecture& arch) {
  arch.validate();
  PolicyParams p;
  p.arch = arch;
  p.weights.assign(arch.parameter_count(), 0.0);
  p.log_std.assign(static_cast<std::size_t>(arch.policy_outputs()), 0.0);
  return p;
}

PolicyParams init_params(const Architecture& arch, std::uint64_t seed, const InitOptions& opts) {
  PolicyParams p = zero_params(arch);
  const Layout l = layout_of(arch);
  std::mt19937_64 rng(derive_seed(seed, SeedStream::kInit, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](std::size_t off, int out, int in, double gain) {
    const double scale = gain / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < static_cast<std::size_t>(out) * static_cast<std::size_t>(in); ++i) {
      p.weights[off + i] = scale * normal(rng);
    }
  };
  for (std::size_t i = 1; i < l.sizes.size(); ++i) fill(l.w_off[i - 1], l.sizes[i], l.sizes[i - 1], 1.0);
  fill(l.policy_w, l.outputs, l.last(), opts.policy_head_scale);
  fill(l.value_w, 1, l.last(), 1.0);
  const double target_bias = std::atanh(std::clamp(opts.initial_target / arch.w_max, -0.999, 0.999));
  const double weight_bias = softplus_inverse(opts.initial_weight / arch.weight_scale);
  for (int s = 0; s < arch.slots(); ++s) {
    p.weights[l.policy_b + static_cast<std::size_t>(s) * kOutputsPerSlot] = target_bias;
    p.weights[l.policy_b + static_cast<std::size_t>(s) * kOutputsPerSlot + 1] = weight_bias;
  }
  p.log_std.assign(static_cast<std::size_t>(l.outputs), opts.log_std);
  return p;
}

ForwardResult forward_raw(const PolicyParams& p, std::span<const double> input,
                          ForwardCache* cache) {
  const Layout l = layout_of(p.arch);
  if (input.size() != static_cast<std::size_t>(l.sizes.front())) {
    throw ContractError("policy input has " + std::to_string(input.size()) + " features, expected " +
                        std::to_string(l.sizes.front()));
  }
  if (p.weights.size() != l.total) throw ShapeError("policy parameter vector has the wrong size");
  const std::span<const double> w(p.weights);

  std::vector<double> h(input.begin(), input.end());
  if (cache != nullptr) {
    cache->input = h;
    cache->layers.clear();
  }
  for (std::size_t i = 1; i < l.sizes.size(); ++i) {
    const auto out = static_cast<std::size_t>(l.sizes[i]);
    std::vector<double> next(out);
    affine(w.subspan(l.w_off[i - 1], out * h.size()), w.subspan(l.b_off[i - 1], out), h, next);
    for (double& v : next) v = std::tanh(v);
    h = std::move(next);
    if (cache != nullptr) cache->layers.push_back(h);
  }

  ForwardResult r;
  r.means.resize(static_cast<std::size_t>(l.outputs));
  affine(w.subspan(l.policy_w, r.means.size() * h.size()), w.subspan(l.policy_b, r.means.size()), h,
         r.means);
  double v = w[l.value_b];
  for (std::size_t i = 0; i < h.size(); ++i) v += w[l.value_w + i] * h[i];
  r.value = v;
  r.log_std = p.log_std;
  return r;
}

void backward_raw(const PolicyParams& p, const ForwardCache& cache,
                  std::span<const double> grad_means, double grad_value,
                  std::span<double> grad_weights) {
  const Layout l = layout_of(p.arch);
  if (grad_weights.size() != l.total || grad_means.size() != static_cast<std::size_t>(l.outputs)) {
    throw ShapeError("backward_raw: gradient buffer sizes do not match the architecture");
  }
  const std::span<const double> w(p.weights);
  const std::vector<double>& top = cache.layers.empty() ? cache.input : cache.layers.back();
  const std::size_t width = top.size();

  std::vector<double> g_h(width, 0.0);
  for (std::size_t o = 0; o < grad_means.size(); ++o) {
    const double g = grad_means[o];
    if (g == 0.0) continue;
    grad_weights[l.policy_b + o] += g;
    const std::size_t row = l.policy_w + o * width;
    for (std::size_t i = 0; i < width; ++i) {
      grad_weights[row + i] += g * top[i];
      g_h[i] += g * w[row + i];
    }
  }
  grad_weights[l.value_b] += grad_value;
  for (std::size_t i = 0; i < width; ++i) {
    grad_weights[l.value_w + i] += grad_value * top[i];
    g_h[i] += grad_value * w[l.value_w + i];
  }

  for (std::size_t li = l.sizes.size() - 1; li >= 1; --li) {
    const std::vector<double>& out = cache.layers[li - 1];
    const std::vector<double>& in = li >= 2 ? cache.layers[li - 2] : cache.input;
    std::vector<double> g_pre(out.size());
    for (std::size_t o = 0; o < out.size(); ++o) g_pre[o] = g_h[o] * (1.0 - out[o] * out[o]);
    std::vector<double> g_in(li >= 2 ? in.size() : 0, 0.0);
    for (std::size_t o = 0; o < out.size(); ++o) {
      const double g = g_pre[o];
      grad_weights[l.b_off[li - 1] + o] += g;
      const std::size_t row = l.w_off[li - 1] + o * in.size();
      for (std::size_t i = 0; i < in.size(); ++i) {
        grad_weights[row + i] += g * in[i];
        if (!g_in.empty()) g_in[i] += g * w[row + i];
      }
    }
    g_h = std::move(g_in);
  }
}

namespace {

json arch_to_json(const Architecture& a) {
  return {{"n_max", a.n_max},
          {"self_features", kSelfFeatures},
          {"neighbor_features", kNeighborFeatures},
          {"outputs_per_slot", kOutputsPerSlot},
          {"hidden", a.hidden},
          {"activation", a.activation},
          {"w_max", a.w_max},
          {"weight_scale", a.weight_scale}};
}

Architecture arch_from_json(const json& j) {
  Architecture a;
  a.n_max = j.at("n_max").get<int>();
  a.hidden = j.at("hidden").get<std::vector<int>>();
  a.activation = j.at("activation").get<std::string>();
  a.w_max = j.at("w_max").get<double>();
  a.weight_scale = j.at("weight_scale").get<double>();
  if (j.at("self_features").get<int>() != kSelfFeatures ||
      j.at("neighbor_features").get<int>() != kNeighborFeatures ||
      j.at("outputs_per_slot").get<int>() != kOutputsPerSlot) {
    throw DataError("policy file feature layout is not supported by this build");
  }
  return a;
}

json header_json(const PolicyParams& p) {
  json h = {{"format", "wnummpc-policy"},
            {"format_version", kPolicyFormatVersion},
            {"architecture", arch_to_json(p.arch)},
            {"parameter_count", p.weights.size()},
            {"log_std_count", p.log_std.size()}};
  if (p.training) {
    h["training"] = {{"iteration", p.training->iteration},
                     {"env_steps", p.training->env_steps},
                     {"seed", p.training->seed}};
  }
  return h;
}

PolicyParams from_header(const json& h) {
  if (h.at("format").get<std::string>() != "wnummpc-policy") throw DataError("not a policy file");
  if (h.at("format_version").get<int>() != kPolicyFormatVersion) {
    throw DataError("unsupported policy format version");
  }
  PolicyParams p;
  p.arch = arch_from_json(h.at("architecture"));
  if (h.contains("training")) {
    const json& t = h.at("training");
    p.training = TrainingStamp{t.at("iteration").get<std::int64_t>(),
                               t.at("env_steps").get<std::int64_t>(),
                               t.at("seed").get<std::uint64_t>()};
  }
  return p;
}

constexpr char kMagic[8] = {'W', 'N', 'U', 'M', 'P', 'O', 'L', '\0'};

}  // namespace

std::string to_json_string(const PolicyParams& p) {
  json j = header_json(p);
  j["parameters"] = p.weights;
  j["log_std"] = p.log_std;
  return j.dump(1);
}

PolicyParams from_json_string(const std::string& text) {
  try {
    const json j = json::parse(text);
    PolicyParams p = from_header(j);
    p.weights = j.at("parameters").get<std::vector<double>>();
    p.log_std = j.at("log_std").get<std::vector<double>>();
    if (p.weights.size() != j.at("parameter_count").get<std::size_t>()) {
      throw DataError("parameter_count does not match the stored parameters");
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed policy JSON: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError(e.what());
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
}

void save_json(const PolicyParams& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json_string(p) << '\n';
}

void save_binary(const PolicyParams& p, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "binary policy IO assumes little endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::string header = header_json(p).dump();
  const auto version = static_cast<std::uint32_t>(kPolicyFormatVersion);
  const auto len = static_cast<std::uint32_t>(header.size());
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(p.weights.data()),
            static_cast<std::streamsize>(p.weights.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(p.log_std.data()),
            static_cast<std::streamsize>(p.log_std.size() * sizeof(double)));
}

PolicyParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open policy file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    return from_json_string(bytes);
  }
  std::size_t pos = sizeof kMagic;
  auto read_u32 = [&](std::uint32_t& v) {
    if (pos + sizeof v > bytes.size()) throw DataError("truncated policy file");
    std::memcpy(&v, bytes.data() + pos, sizeof v);
    pos += sizeof v;
  };
  std::uint32_t version = 0, len = 0;
  read_u32(version);
  read_u32(len);
  if (version != kPolicyFormatVersion) throw DataError("unsupported policy format version");
  if (pos + len > bytes.size()) throw DataError("truncated policy header");
  PolicyParams p;
  try {
    const json h = json::parse(bytes.substr(pos, len));
    p = from_header(h);
    pos += len;
    p.weights.resize(h.at("parameter_count").get<std::size_t>());
    p.log_std.resize(h.at("log_std_count").get<std::size_t>());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed policy header: ") + e.what());
  }
  const std::size_t need = (p.weights.size() + p.log_std.size()) * sizeof(double);
  if (pos + need != bytes.size()) throw DataError("policy payload size mismatch");
  std::memcpy(p.weights.data(), bytes.data() + pos, p.weights.size() * sizeof(double));
  pos += p.weights.size() * sizeof(double);
  std::memcpy(p.log_std.data(), bytes.data() + pos, p.log_std.size() * sizeof(double));
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  return p;
}

}  // namespace wnum::planner
