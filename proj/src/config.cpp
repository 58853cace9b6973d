#include "tslip/config.hpp"

#include <array>
#include <functional>
#include <limits>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace tslip {

using nlohmann::json;

namespace {

template <typename E>
using EnumTable = std::initializer_list<std::pair<E, const char*>>;

const EnumTable<DamperKind> kDamperKinds{{DamperKind::bilinear, "bilinear"},
                                         {DamperKind::linear, "linear"}};
const EnumTable<Phase2Method> kPhase2Methods{{Phase2Method::shooting, "shooting"},
                                             {Phase2Method::incremental, "incremental"}};
const EnumTable<MeanPitchWindow> kMeanPitchWindows{{MeanPitchWindow::stride, "stride"},
                                                   {MeanPitchWindow::stance, "stance"}};
const EnumTable<ColdStart> kColdStarts{{ColdStart::reference_orbit, "reference_orbit"},
                                       {ColdStart::height_ratio, "height_ratio"}};
const EnumTable<VpFrame> kFrames{{VpFrame::body, "body"}, {VpFrame::world, "world"}};
const EnumTable<AngularVelocityWindow> kWindows{
    {AngularVelocityWindow::dominant_segment, "dominant_segment"},
    {AngularVelocityWindow::stance, "stance"},
    {AngularVelocityWindow::stride, "stride"}};
const EnumTable<OutputFormat> kFormats{
    {OutputFormat::csv, "csv"}, {OutputFormat::plots, "plots"}, {OutputFormat::both, "both"}};

template <typename E>
std::string enum_choices(EnumTable<E> table) {
  std::string out;
  for (const auto& [value, name] : table) out += (out.empty() ? "" : ", ") + std::string(name);
  return out;
}

// Writes the config into a JSON object.
class Writer {
 public:
  json doc = json::object();

  void section(const char* name, const std::function<void()>& body) {
    json saved = std::exchange(doc, json::object());
    body();
    saved[name] = std::move(doc);
    doc = std::move(saved);
  }
  void number(const char* name, double& v) { doc[name] = v; }
  // Fifteen digits hide the last-bit noise of the radian round trip.
  void degrees(const char* name, double& rad) {
    std::ostringstream text;
    text.precision(15);
    text << rad2deg(rad);
    doc[name] = std::stod(text.str());
  }
  void integer(const char* name, int& v) { doc[name] = v; }
  void boolean(const char* name, bool& v) { doc[name] = v; }
  void numbers(const char* name, std::vector<double>& v) { doc[name] = v; }
  template <typename E>
  void enumeration(const char* name, E& v, EnumTable<E> table) {
    for (const auto& [value, text] : table)
      if (value == v) doc[name] = text;
  }
  template <typename E>
  void optional_enum(const char* name, std::optional<E>& v, EnumTable<E> table,
                     const char* empty) {
    if (!v) {
      doc[name] = empty;
      return;
    }
    enumeration(name, *v, table);
  }
  void optional_string(const char* name, std::optional<std::string>& v) {
    doc[name] = v ? json(*v) : json(nullptr);
  }
};

// Reads values present in a JSON object and rejects anything unexpected.
class Reader {
 public:
  explicit Reader(const json& root) : node_(&root) { check_object(root, ""); }

  void section(const char* name, const std::function<void()>& body) {
    const json* child = take(name);
    if (child == nullptr) return;
    const std::string p = path(name);
    check_object(*child, p);
    const json* saved_node = std::exchange(node_, child);
    std::string saved_prefix = std::exchange(prefix_, p);
    body();
    finish();
    node_ = saved_node;
    prefix_ = std::move(saved_prefix);
  }
  void number(const char* name, double& v) {
    if (const json* j = take(name)) v = as_number(*j, path(name));
  }
  void degrees(const char* name, double& rad) {
    if (const json* j = take(name)) rad = deg2rad(as_number(*j, path(name)));
  }
  void integer(const char* name, int& v) {
    const json* j = take(name);
    if (j == nullptr) return;
    if (!j->is_number_integer()) throw ConfigError(path(name) + ": expected an integer");
    const auto value = j->get<long long>();
    if (value < std::numeric_limits<int>::min() || value > std::numeric_limits<int>::max())
      throw ConfigError(path(name) + ": integer out of range");
    v = static_cast<int>(value);
  }
  void boolean(const char* name, bool& v) {
    const json* j = take(name);
    if (j == nullptr) return;
    if (!j->is_boolean()) throw ConfigError(path(name) + ": expected true or false");
    v = j->get<bool>();
  }
  void numbers(const char* name, std::vector<double>& v) {
    const json* j = take(name);
    if (j == nullptr) return;
    if (!j->is_array()) throw ConfigError(path(name) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j->size(); ++i)
      out.push_back(as_number((*j)[i], path(name) + "[" + std::to_string(i) + "]"));
    v = std::move(out);
  }
  template <typename E>
  void enumeration(const char* name, E& v, EnumTable<E> table) {
    const json* j = take(name);
    if (j == nullptr) return;
    v = as_enum(*j, path(name), table);
  }
  template <typename E>
  void optional_enum(const char* name, std::optional<E>& v, EnumTable<E> table,
                     const char* empty) {
    const json* j = take(name);
    if (j == nullptr) return;
    if (j->is_string() && j->get<std::string>() == empty) {
      v.reset();
      return;
    }
    v = as_enum(*j, path(name), table);
  }
  void optional_string(const char* name, std::optional<std::string>& v) {
    const json* j = take(name);
    if (j == nullptr) return;
    if (j->is_null()) {
      v.reset();
    } else if (j->is_string()) {
      v = j->get<std::string>();
    } else {
      throw ConfigError(path(name) + ": expected a string or null");
    }
  }

  void finish() {
    for (const auto& [key, value] : node_->items())
      if (!seen_.contains(path(key.c_str()))) throw ConfigError(path(key.c_str()) + ": unknown key");
  }

 private:
  const json* node_;
  std::string prefix_;
  std::set<std::string> seen_;

  std::string path(const char* name) const { return prefix_.empty() ? name : prefix_ + "." + name; }

  const json* take(const char* name) {
    seen_.insert(path(name));
    const auto it = node_->find(name);
    return it == node_->end() ? nullptr : &*it;
  }

  static void check_object(const json& j, const std::string& where) {
    if (!j.is_object())
      throw ConfigError((where.empty() ? std::string("config") : where) + ": expected an object");
  }

  static double as_number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(where + ": must be finite");
    return v;
  }

  template <typename E>
  static E as_enum(const json& j, const std::string& where, EnumTable<E> table) {
    if (j.is_string()) {
      const auto text = j.get<std::string>();
      for (const auto& [value, name] : table)
        if (text == name) return value;
    }
    throw ConfigError(where + ": expected one of " + enum_choices(table));
  }
};

// One description of the schema shared by reading and writing.
template <typename V>
void visit(RunConfig& c, V& v) {
  v.integer("schema_version", c.schema_version);
  v.boolean("deterministic", c.deterministic);
  v.section("model", [&] {
    v.number("mass", c.model.mass);
    v.number("inertia", c.model.inertia);
    v.number("leg_stiffness", c.model.leg_stiffness);
    v.number("leg_rest_length", c.model.leg_rest_length);
    v.number("hip_com_distance", c.model.hip_com_distance);
    v.number("gravity", c.model.gravity);
    v.number("damping_coefficient", c.model.damping_coefficient);
    v.enumeration("damper_kind", c.model.damper_kind, kDamperKinds);
  });
  v.section("controller", [&] {
    ControllerSettings& s = c.controller;
    v.section("leg_placement", [&] {
      v.number("k_xdot0", s.leg.k_xdot0);
      v.number("k_xdot", s.leg.k_xdot);
      v.number("k_y", s.leg.k_y);
      v.degrees("initial_td_angle_deg", s.leg.initial_td_angle);
      v.degrees("initial_td_angle_per_speed_deg", s.leg.initial_td_angle_per_speed);
      v.degrees("max_step_deg", s.leg.max_step);
    });
    v.section("pid", [&] {
      v.number("k_p", s.pid.k_p);
      v.number("k_d", s.pid.k_d);
      v.number("k_i", s.pid.k_i);
      v.degrees("desired_pitch_deg", s.pid.desired_pitch);
      v.degrees("desired_pitch_rate_deg", s.pid.desired_pitch_rate);
    });
    v.number("k_vp", s.k_vp);
    v.number("steady_tolerance", s.steady_tolerance);
    v.integer("steady_strides", s.steady_strides);
    v.number("converge_tolerance", s.converge_tolerance);
    v.enumeration("phase2_method", s.method, kPhase2Methods);
    v.enumeration("mean_pitch_window", s.mean_pitch_window, kMeanPitchWindows);
    v.integer("stride_budget", s.stride_budget);
    v.enumeration("cold_start", s.cold_start, kColdStarts);
    v.number("cold_start_height_ratio", s.cold_start_height_ratio);
    v.integer("recorded_strides", s.recorded_strides);
    v.number("shooting_tolerance", s.shooting_tolerance);
    v.integer("shooting_max_iterations", s.shooting_max_iterations);
    v.number("shooting_step", s.shooting_step);
    v.boolean("keep_transient_samples", s.keep_transient_samples);
  });
  v.section("integrator", [&] {
    IntegrationLimits& l = c.simulation.limits;
    v.number("abs_tol", l.abs_tol);
    v.number("rel_tol", l.rel_tol);
    v.number("sample_period", l.sample_period);
    v.number("max_step", l.max_step);
    v.number("min_step", l.min_step);
    v.number("max_duration", l.max_duration);
  });
  v.section("simulation", [&] {
    v.number("fall_height_fraction", c.simulation.fall_height_fraction);
    v.number("apex_tolerance", c.simulation.apex_tolerance);
  });
  v.section("analysis", [&] {
    v.enumeration("angular_velocity_window", c.angular_velocity_window, kWindows);
  });
  v.section("run", [&] {
    v.number("vp_radius", c.vp_radius);
    v.optional_enum("vp_frame", c.vp_frame, kFrames, "auto");
    v.number("speed", c.speed);
    v.boolean("tune_damping", c.tune_damping);
  });
  v.section("sweep", [&] {
    v.numbers("vp_radii", c.vp_radii);
    v.numbers("speeds", c.speeds);
    v.enumeration("frame_above", c.frame_above, kFrames);
    v.enumeration("frame_below", c.frame_below, kFrames);
    v.integer("parallelism", c.parallelism);
    v.section("duty_factor", [&] {
      v.number("slow_speed", c.duty_factor.slow_speed);
      v.number("slow_lo", c.duty_factor.slow.lo);
      v.number("slow_hi", c.duty_factor.slow.hi);
      v.number("fast_speed", c.duty_factor.fast_speed);
      v.number("fast_lo", c.duty_factor.fast.lo);
      v.number("fast_hi", c.duty_factor.fast.hi);
    });
    v.section("damping_search", [&] {
      v.number("c_min", c.damping_search.c_min);
      v.number("c_max", c.damping_search.c_max);
      v.number("centre_tolerance", c.damping_search.centre_tolerance);
      v.integer("max_evaluations", c.damping_search.max_evaluations);
    });
  });
  v.section("gain_search", [&] {
    v.numbers("k_p", c.gain_grid.k_p);
    v.numbers("k_d", c.gain_grid.k_d);
    v.numbers("k_xdot0", c.gain_grid.k_xdot0);
    v.numbers("k_xdot", c.gain_grid.k_xdot);
    v.numbers("k_y", c.gain_grid.k_y);
    v.number("ki_over_kp", c.gain_grid.ki_over_kp);
    v.number("reference_speed", c.gain_reference_speed);
  });
  v.section("output", [&] {
    v.optional_string("directory", c.output_directory);
    v.enumeration("format", c.output_format, kFormats);
  });
}

}  // namespace

const char* to_string(OutputFormat format) {
  for (const auto& [value, name] : kFormats)
    if (value == format) return name;
  return "both";
}

OutputFormat parse_output_format(std::string_view text) {
  for (const auto& [value, name] : kFormats)
    if (text == name) return value;
  throw ConfigError("format: expected one of " + enum_choices(kFormats));
}

VpTargetd RunConfig::vp() const {
  return {vp_radius, 0.0, vp_frame.value_or(vp_radius < 0 ? frame_below : frame_above)};
}

SweepPlan RunConfig::sweep_plan() const {
  SweepPlan plan;
  plan.model = model;
  plan.controller = controller;
  plan.simulation = simulation;
  plan.vp_radii = vp_radii;
  plan.frame_above = frame_above;
  plan.frame_below = frame_below;
  plan.speeds = speeds;
  plan.tune_damping = tune_damping;
  plan.duty_factor = duty_factor;
  plan.damping = damping_search;
  plan.parallelism = parallelism;
  return plan;
}

void RunConfig::validate() const {
  auto check = [](const char* where, auto&& fn) {
    try {
      fn();
    } catch (const ModelError& e) {
      throw ConfigError(std::string(where) + ": " + e.what());
    }
  };
  if (schema_version != kSchemaVersion)
    throw ConfigError("schema_version: unsupported version " + std::to_string(schema_version));
  if (!deterministic) throw ConfigError("deterministic: runs are always deterministic");
  check("model", [&] { model.validate(); });
  check("controller", [&] { controller.validate(); });
  const IntegrationLimits& l = simulation.limits;
  if (!(l.abs_tol > 0 && l.rel_tol > 0 && l.sample_period > 0 && l.max_step > 0 &&
        l.min_step > 0 && l.min_step < l.max_step && l.max_duration > 0))
    throw ConfigError("integrator: tolerances, steps and durations must be positive");
  if (!(simulation.fall_height_fraction > 0 && simulation.fall_height_fraction < 1))
    throw ConfigError("simulation.fall_height_fraction: must lie in (0, 1)");
  if (!(simulation.apex_tolerance > 0))
    throw ConfigError("simulation.apex_tolerance: must be positive");
  check("run", [&] { vp().validate(); });
  if (!(speed > 0)) throw ConfigError("run.speed: must be positive");
  check("sweep", [&] { sweep_plan().validate(); });
  check("sweep.duty_factor", [&] { duty_factor.validate(); });
  check("sweep.damping_search", [&] { damping_search.validate(); });
  check("gain_search", [&] { gain_grid.validate(); });
  if (!(gain_reference_speed > 0)) throw ConfigError("gain_search.reference_speed: must be positive");
  if (output_directory && output_directory->empty())
    throw ConfigError("output.directory: must not be empty");
}

RunConfig default_config() {
  RunConfig c;
  c.model.damping_coefficient = 1000;
  ControllerSettings& s = c.controller;
  // Grid-search result; see README.
  s.leg.k_xdot0 = -0.005;
  s.leg.k_xdot = -0.1;
  s.leg.k_y = 1.0;
  s.leg.initial_td_angle = deg2rad(67.0);
  s.leg.initial_td_angle_per_speed = deg2rad(-1.26);
  s.pid.k_p = 2000;
  s.pid.k_d = 2000;
  s.pid.k_i = 200;
  return c;
}

RunConfig parse_config(const json& doc) {
  RunConfig c = default_config();
  Reader reader(doc);
  visit(c, reader);
  reader.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& config) {
  RunConfig copy = config;
  Writer writer;
  visit(copy, writer);
  return writer.doc;
}

std::string canonical_text(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

std::string config_hash(const RunConfig& config) { return sha256_hex(canonical_text(config)); }

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for hashing");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

}  // namespace tslip
