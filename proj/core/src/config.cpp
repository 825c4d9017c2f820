#include "gridrl/config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "gridrl/errors.hpp"

namespace gridrl {

using json = nlohmann::json;

namespace {

// Reads fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) {
      throw SchemaError(fmt::format("config: '{}' must be an object", path_));
    }
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) {
      return;
    }
    for (const auto& [key, value] : obj_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        throw SchemaError(fmt::format("config: unknown key '{}.{}'", path_, key));
      }
    }
  }

  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  template <typename T>
  void read(const char* key, T& out) {
    seen_.emplace_back(key);
    if (!obj_.contains(key)) {
      return;
    }
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw SchemaError(fmt::format("config: '{}.{}' has the wrong type: {}", path_, key,
                                    e.what()));
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  Section child(const char* key) {
    seen_.emplace_back(key);
    static const json empty = json::object();
    return Section(obj_.contains(key) ? obj_.at(key) : empty, path_ + "." + key);
  }

  void range(const char* key, Range& out) {
    seen_.emplace_back(key);
    if (!obj_.contains(key)) {
      return;
    }
    const json& v = obj_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw SchemaError(fmt::format("config: '{}.{}' must be [lo, hi]", path_, key));
    }
    out = Range{v[0].get<double>(), v[1].get<double>()};
    if (out.hi < out.lo) {
      throw SchemaError(fmt::format("config: '{}.{}' has hi < lo", path_, key));
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string> seen_;
};

void apply_override(json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw SchemaError(fmt::format("override '{}' must look like key.path=value", spec));
  }
  const std::string key = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) {
      throw SchemaError(fmt::format("override '{}' has an empty key segment", spec));
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) {
      (*node)[part] = json::object();
    }
    node = &(*node)[part];
    if (!node->is_object()) {
      throw SchemaError(fmt::format("override '{}': '{}' is not an object", spec, part));
    }
    start = dot + 1;
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) {
    return {};
  }
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void read_curve(Section& s, DroopCurve& curve) {
  s.read("v1", curve.v1);
  s.read("v2", curve.v2);
  s.read("v3", curve.v3);
  s.read("v4", curve.v4);
  s.read("q_max", curve.q_max);
}

void read_category(Section& s, CategoryRanges& r) {
  s.range("load", r.load);
  s.range("pv", r.pv);
}

}  // namespace

AppConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                       std::span<const std::string> overrides) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw SchemaError(fmt::format("config: malformed JSON: {}", e.what()));
  }
  if (!doc.is_object()) {
    throw SchemaError("config: top level must be an object");
  }
  for (const std::string& o : overrides) {
    apply_override(doc, o);
  }

  AppConfig cfg;
  Section root(doc, "config");
  std::string network;
  std::string profiles;
  std::string output_dir = cfg.output_dir.string();
  root.read("network", network);
  root.read("profiles", profiles);
  root.read("output_dir", output_dir);
  cfg.network = resolve(base_dir, network);
  cfg.profiles = resolve(base_dir, profiles);
  cfg.output_dir = resolve(base_dir, output_dir);

  {
    Section s = root.child("solver");
    s.read("tolerance", cfg.solver.tolerance);
    s.read("max_iter", cfg.solver.max_iter);
    s.read("slack_voltage", cfg.solver.slack_vm);
  }
  {
    Section s = root.child("reward");
    s.read("c", cfg.reward.c);
    s.read("zone1_penalty", cfg.reward.zone1_penalty);
    s.read("zone2_penalty", cfg.reward.zone2_penalty);
    Section z = s.child("zones");
    z.read("normal_low", cfg.reward.zones.normal_low);
    z.read("normal_high", cfg.reward.zones.normal_high);
    z.read("zone1_low", cfg.reward.zones.zone1_low);
    z.read("zone1_high", cfg.reward.zones.zone1_high);
  }
  {
    Section s = root.child("droop");
    s.read("tolerance", cfg.droop.tolerance);
    s.read("damping", cfg.droop.damping);
    s.read("max_iter", cfg.droop.max_iter);
    if (s.has("curve")) {
      DroopCurve curve;
      Section c = s.child("curve");
      read_curve(c, curve);
      curve.validate();
      cfg.droop_curve = curve;
    } else {
      s.child("curve");
    }
  }
  {
    Section s = root.child("agent");
    s.read("hidden", cfg.agent.hidden);
    s.read("actor_lr", cfg.agent.actor_lr);
    s.read("critic_lr", cfg.agent.critic_lr);
    s.read("gamma", cfg.agent.gamma);
    s.read("tau", cfg.agent.tau);
    s.read("buffer_capacity", cfg.agent.buffer_capacity);
    s.read("batch_size", cfg.agent.batch_size);
    s.read("reward_scale", cfg.agent.reward_scale);
    s.read("final_init", cfg.agent.final_init);
    Section n = s.child("noise");
    n.read("theta", cfg.agent.noise.theta);
    n.read("sigma", cfg.agent.noise.sigma);
    n.read("mu", cfg.agent.noise.mu);
    n.read("dt", cfg.agent.noise.dt);
  }
  cfg.agent.validate();
  {
    Section s = root.child("training");
    s.read("episodes", cfg.training.episodes);
    s.read("seed", cfg.training.seed);
    s.read("max_nonconverged_fraction", cfg.training.max_nonconverged_fraction);
    s.read("checkpoint_every", cfg.training.checkpoint_every);
    std::string ckpt_dir;
    s.read("checkpoint_dir", ckpt_dir);
    cfg.training.checkpoint_dir = resolve(base_dir, ckpt_dir);
    {
      Section t = s.child("termination");
      t.read("min_iters_before_check", cfg.training.termination.min_iters_before_check);
      t.read("window", cfg.training.termination.window);
      t.read("epsilon", cfg.training.termination.epsilon);
      t.read("max_iters", cfg.training.termination.max_iters);
    }
    Section c = s.child("categories");
    {
      Section w = c.child("weights");
      w.read("evening", cfg.category_weights[0]);
      w.read("midday_peak", cfg.category_weights[1]);
      w.read("normal", cfg.category_weights[2]);
    }
    {
      Section e = c.child("evening");
      read_category(e, cfg.scenario_ranges.evening);
    }
    {
      Section m = c.child("midday_peak");
      read_category(m, cfg.scenario_ranges.midday_peak);
    }
    {
      Section n = c.child("normal");
      read_category(n, cfg.scenario_ranges.normal);
    }
  }
  {
    Section s = root.child("evaluation");
    s.read("start_hour", cfg.evaluation.start_hour);
    s.read("hours", cfg.evaluation.hours);
    s.read("threads", cfg.evaluation.threads);
  }
  cfg.evaluation.solver = cfg.solver;
  cfg.evaluation.zones = cfg.reward.zones;
  cfg.evaluation.droop = cfg.droop;
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError(fmt::format("cannot open config file {}", path.string()));
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path(), overrides);
}

NetworkModel load_configured_network(const AppConfig& config) {
  if (config.network.empty()) {
    throw SchemaError("config: 'network' path is required");
  }
  NetworkModel net = load_network(config.network);
  if (!config.droop_curve) {
    return net;
  }
  std::vector<DroopCurve> curves(net.inverters().size(), *config.droop_curve);
  return NetworkModel(net.name(), net.mva_base(),
                      std::vector<Bus>(net.buses().begin(), net.buses().end()),
                      std::vector<Line>(net.lines().begin(), net.lines().end()),
                      std::vector<InverterSpec>(net.inverters().begin(), net.inverters().end()),
                      std::move(curves));
}

}  // namespace gridrl
