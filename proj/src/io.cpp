#include "tslip/io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tslip/config.hpp"

namespace tslip {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Generic CSV

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw CsvError("missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", value == 0 ? 0.0 : value);
  return buf;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

namespace {

void append_line(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_escape(fields[i]);
  }
  out += '\n';
}

std::vector<std::string> split_line(std::string_view text, std::size_t& pos) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    const char ch = text[pos++];
    if (quoted) {
      if (ch == '"') {
        if (pos < text.size() && text[pos] == '"') {
          field += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (quoted) throw CsvError("unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

double to_number(const std::string& text, std::string_view column) {
  if (text == "nan") return NAN;
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw CsvError("column '" + std::string(column) + "': not a number: '" + text + "'");
  return v;
}

}  // namespace

std::string write_csv(const CsvTable& table) {
  if (table.units.size() != table.columns.size())
    throw std::invalid_argument("CSV units row must match the columns");
  std::string out;
  append_line(out, table.columns);
  append_line(out, table.units);
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw std::invalid_argument("CSV row width does not match the header");
    append_line(out, row);
  }
  return out;
}

CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  std::size_t pos = 0;
  if (text.empty()) throw CsvError("empty CSV input");
  t.columns = split_line(text, pos);
  if (pos >= text.size()) throw CsvError("CSV input lacks the units row");
  t.units = split_line(text, pos);
  if (t.units.size() != t.columns.size()) throw CsvError("units row width does not match the header");
  while (pos < text.size()) {
    auto row = split_line(text, pos);
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != t.columns.size())
      throw CsvError("row " + std::to_string(t.rows.size() + 1) + " has " +
                     std::to_string(row.size()) + " fields, expected " +
                     std::to_string(t.columns.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Strides

namespace {

constexpr std::array<std::string_view, 17> kTimeseriesUnits{
    "s", "m", "m", "rad", "m/s", "m/s", "rad/s", "-", "m", "m/s",
    "N", "N", "N", "N", "N·m", "W", "W"};

}  // namespace

std::string timeseries_csv(std::span<const StrideRecord> records) {
  if (records.empty()) throw std::invalid_argument("no stride records to write");
  CsvTable t;
  t.columns.assign(kTimeseriesColumns.begin(), kTimeseriesColumns.end());
  t.units.assign(kTimeseriesUnits.begin(), kTimeseriesUnits.end());
  for (const StrideRecord& r : records) {
    if (r.samples.empty()) throw std::invalid_argument("stride record without samples");
    for (const Sample& s : r.samples) {
      const BodyStated& x = s.state;
      const bool stance = s.phase == GaitPhase::stance;
      t.rows.push_back({format_number(s.time), format_number(x.x_com), format_number(x.y_com),
                        format_number(x.pitch), format_number(x.vx), format_number(x.vy),
                        format_number(x.pitch_rate), to_string(s.phase),
                        format_number(stance ? s.stance.leg_length : 0.0),
                        format_number(stance ? s.stance.leg_length_rate : 0.0),
                        format_number(stance ? s.grf.x() : 0.0),
                        format_number(stance ? s.grf.y() : 0.0),
                        format_number(stance ? s.stance.axial_force : 0.0),
                        format_number(stance ? s.stance.tangential_force : 0.0),
                        format_number(stance ? s.stance.hip_torque : 0.0),
                        format_number(stance ? s.hip_power : 0.0),
                        format_number(stance ? s.damper_power : 0.0)});
    }
  }
  return write_csv(t);
}

std::vector<StrideRecord> parse_timeseries(std::string_view text, const ModelParamsd& params) {
  const CsvTable t = parse_csv(text);
  std::array<std::size_t, kTimeseriesColumns.size()> col{};
  for (std::size_t i = 0; i < col.size(); ++i) col[i] = t.column(kTimeseriesColumns[i]);
  auto num = [&](const std::vector<std::string>& row, std::size_t i) {
    return to_number(row[col[i]], kTimeseriesColumns[i]);
  };

  std::vector<StrideRecord> strides;
  StrideRecord current;
  auto close = [&] {
    if (current.samples.empty()) return;
    StrideRecord& r = current;
    auto& s = r.samples;
    const auto first_stance = std::find_if(s.begin(), s.end(), [](const Sample& x) {
      return x.phase == GaitPhase::stance;
    });
    if (first_stance == s.end())
      throw CsvError("stride " + std::to_string(strides.size()) + " has no stance rows");
    const auto last_stance = std::find_if(s.rbegin(), s.rend(), [](const Sample& x) {
                               return x.phase == GaitPhase::stance;
                             }).base() - 1;
    r.events.start = s.front().time;
    r.events.apex = s.back().time;
    r.events.touchdown = first_stance->time;
    r.events.takeoff = last_stance->time;
    r.start_apex = s.front().state;
    r.end_apex = s.back().state;
    const Vector2d hip_td = hip_position(params, first_stance->state);
    r.td_angle = std::asin(std::clamp(hip_td.y() / params.leg_rest_length, -1.0, 1.0));
    r.foot = {hip_td.x() + params.leg_rest_length * std::cos(r.td_angle), 0.0};
    auto ms = first_stance;
    for (auto it = first_stance; it != last_stance + 1; ++it) {
      if (it->phase != GaitPhase::stance)
        throw CsvError("stride " + std::to_string(strides.size()) + " has a split stance phase");
      // Complete the stance context from geometry and the stored forces.
      StanceContextd c = leg_kinematics(params, it->state, r.foot);
      c.leg_length = it->stance.leg_length;
      c.leg_length_rate = it->stance.leg_length_rate;
      c.spring_force = spring_force(params, c.leg_length);
      c.axial_force = it->stance.axial_force;
      c.damper_force = c.spring_force - c.axial_force;
      c.tangential_force = it->stance.tangential_force;
      c.hip_torque = it->stance.hip_torque;
      it->stance = c;
      it->spring_power = c.spring_force * c.leg_length_rate;
      if (c.leg_length < ms->stance.leg_length) ms = it;
    }
    r.events.midstance = ms->time;
    r.index = static_cast<int>(strides.size());
    strides.push_back(std::move(r));
    current = StrideRecord{};
  };

  double last_time = -INFINITY;
  for (const auto& row : t.rows) {
    Sample s;
    s.time = num(row, 0);
    if (!(s.time > last_time)) close();
    last_time = s.time;
    s.state.time = s.time;
    s.state.x_com = num(row, 1);
    s.state.y_com = num(row, 2);
    s.state.pitch = num(row, 3);
    s.state.vx = num(row, 4);
    s.state.vy = num(row, 5);
    s.state.pitch_rate = num(row, 6);
    const std::string& phase = row[col[7]];
    if (phase == "stance") {
      s.phase = GaitPhase::stance;
    } else if (phase == "flight") {
      s.phase = GaitPhase::flight;
    } else {
      throw CsvError("column 'phase': expected flight or stance, got '" + phase + "'");
    }
    s.stance.leg_length = num(row, 8);
    s.stance.leg_length_rate = num(row, 9);
    s.grf = {num(row, 10), num(row, 11)};
    s.stance.axial_force = num(row, 12);
    s.stance.tangential_force = num(row, 13);
    s.stance.hip_torque = num(row, 14);
    s.hip_power = num(row, 15);
    s.damper_power = num(row, 16);
    if (s.phase == GaitPhase::flight) s.stance = StanceContextd{};
    current.samples.push_back(s);
  }
  close();
  if (strides.empty()) throw CsvError("time series has no rows");
  return strides;
}

// ---------------------------------------------------------------------------
// Metric tables

namespace {

struct MetricColumn {
  const char* name;
  const char* unit;
};

constexpr MetricColumn kMetricColumns[] = {
    {"stride", "-"},
    {"damping_coefficient", "N·s/m^2"},
    {"td_angle", "deg"},
    {"duty_factor", "-"},
    {"period", "s"},
    {"stance_time", "s"},
    {"mean_inclination", "deg"},
    {"angular_excursion", "deg"},
    {"mean_angular_velocity", "deg/s"},
    {"peak_angular_velocity", "deg/s"},
    {"max_flexion_phase", "%"},
    {"direction", "-"},
    {"pitch_td", "deg"},
    {"pitch_ms", "deg"},
    {"hip_positive", "J"},
    {"hip_negative", "J"},
    {"hip_net", "J"},
    {"damper_positive", "J"},
    {"damper_negative", "J"},
    {"damper_net", "J"},
    {"spring_positive", "J"},
    {"spring_negative", "J"},
    {"spring_net", "J"},
    {"leg_positive", "J"},
    {"leg_negative", "J"},
    {"leg_net", "J"},
    {"energy_change", "J"},
    {"ledger_residual", "J"},
    {"work_throughput", "J"},
    {"midstance_percent", "%"},
    {"reversal_percent", "%"},
    {"peak_compression", "m"},
    {"peak_leg_rate", "m/s"},
    {"peak_spring_force", "N"},
    {"peak_damper_force", "N"},
    {"peak_axial_force", "N"},
};

std::vector<std::string> metric_fields(const MetricsRow& row) {
  const StrideMetrics& m = row.metrics;
  const WorkLedger& w = m.work;
  auto n = format_number;
  return {std::to_string(row.stride),
          n(row.damping),
          n(m.td_angle),
          n(m.duty_factor),
          n(m.period),
          n(m.stance_time),
          n(m.trunk.mean_inclination),
          n(m.trunk.angular_excursion),
          n(m.trunk.mean_angular_velocity),
          n(m.trunk.peak_angular_velocity),
          n(m.trunk.max_flexion_phase),
          to_string(m.trunk.direction),
          n(m.trunk.pitch_touchdown),
          n(m.trunk.pitch_midstance),
          n(w.hip.positive),
          n(w.hip.negative),
          n(w.hip.net),
          n(w.damper.positive),
          n(w.damper.negative),
          n(w.damper.net),
          n(w.spring.positive),
          n(w.spring.negative),
          n(w.spring.net),
          n(w.leg.positive),
          n(w.leg.negative),
          n(w.leg.net),
          n(w.energy_change),
          n(w.residual),
          n(w.throughput),
          n(m.energy.midstance_percent),
          m.energy.reversal_percent ? n(*m.energy.reversal_percent) : "",
          n(m.peaks.compression),
          n(m.peaks.length_rate),
          n(m.peaks.spring_force),
          n(m.peaks.damper_force),
          n(m.peaks.axial_force)};
}

std::string vp_frame_name(VpFrame f) { return f == VpFrame::body ? "body" : "world"; }

}  // namespace

CsvTable metrics_table(std::span<const MetricsRow> rows) {
  CsvTable t;
  for (const auto& c : kMetricColumns) {
    t.columns.emplace_back(c.name);
    t.units.emplace_back(c.unit);
  }
  for (const auto& r : rows) t.rows.push_back(metric_fields(r));
  return t;
}

std::vector<MetricsRow> metrics_rows(std::span<const StrideRecord> records,
                                     const ModelParamsd& params, AngularVelocityWindow window) {
  std::vector<MetricsRow> rows;
  for (const StrideRecord& r : records) {
    MetricsRow row{static_cast<int>(rows.size()), params.damping_coefficient,
                   stride_metrics(r, params)};
    row.metrics.trunk = trunk_metrics(r, window);
    rows.push_back(row);
  }
  return rows;
}

CsvTable summary_table(const SweepResult& result) {
  CsvTable t;
  const std::vector<std::pair<const char*, const char*>> cols{
      {"vp_radius", "m"},
      {"speed", "m/s"},
      {"vp_frame", "-"},
      {"damping_coefficient", "N·s/m^2"},
      {"converged", "-"},
      {"direction", "-"},
      {"angular_excursion", "deg"},
      {"mean_angular_velocity", "deg/s"},
      {"peak_angular_velocity", "deg/s"},
      {"mean_inclination", "deg"},
      {"max_flexion_phase", "%"},
      {"duty_factor", "-"},
      {"td_angle", "deg"},
      {"vp_angle", "deg"},
      {"hip_positive", "J"},
      {"hip_negative", "J"},
      {"hip_net", "J"},
      {"damper_net", "J"},
      {"leg_positive", "J"},
      {"leg_negative", "J"},
      {"leg_net", "J"},
      {"work_throughput", "J"},
      {"midstance_percent", "%"},
      {"reversal_percent", "%"},
      {"vp_moment_error", "-"},
      {"metric_spread", "-"},
      {"failure_phase", "-"},
      {"failure_stride", "-"},
      {"failure_reason", "-"},
  };
  for (const auto& [name, unit] : cols) {
    t.columns.emplace_back(name);
    t.units.emplace_back(unit);
  }
  auto n = format_number;
  for (const SweepCell& c : result.cells) {
    std::vector<std::string> row{n(c.vp_radius), n(c.speed), vp_frame_name(c.vp.angle_frame),
                                 n(c.damping), c.converged ? "true" : "false"};
    if (c.converged && c.metrics) {
      const StrideMetrics& m = *c.metrics;
      const WorkLedger& w = m.work;
      row.emplace_back(to_string(m.trunk.direction));
      for (double v : {m.trunk.angular_excursion, m.trunk.mean_angular_velocity,
                       m.trunk.peak_angular_velocity, m.trunk.mean_inclination,
                       m.trunk.max_flexion_phase, m.duty_factor, m.td_angle,
                       rad2deg(c.gait->vp.angle), w.hip.positive, w.hip.negative, w.hip.net,
                       w.damper.net, w.leg.positive, w.leg.negative, w.leg.net, w.throughput,
                       m.energy.midstance_percent})
        row.push_back(n(v));
      row.push_back(m.energy.reversal_percent ? n(*m.energy.reversal_percent) : "");
      row.push_back(n(c.vp_moment_error));
      row.push_back(n(c.metric_spread));
      row.insert(row.end(), {"", "", ""});
    } else {
      row.resize(t.columns.size() - 3);
      row.push_back(c.failure ? to_string(c.failure->phase) : "");
      row.push_back(c.failure ? std::to_string(c.failure->stride_index) : "");
      row.push_back(c.failure ? c.failure->reason : "not converged");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable tuning_table(const SweepResult& result) {
  CsvTable t;
  t.columns = {"speed", "band_lo", "band_hi", "damping_coefficient", "duty_factor", "td_angle",
               "evaluations", "failure"};
  t.units = {"m/s", "-", "-", "N·s/m^2", "-", "deg", "-", "-"};
  for (std::size_t i = 0; i < result.speeds.size(); ++i) {
    const auto& tune = result.tunings[i];
    if (tune) {
      t.rows.push_back({format_number(tune->speed), format_number(tune->band.lo),
                        format_number(tune->band.hi), format_number(tune->damping),
                        format_number(tune->duty_factor), format_number(rad2deg(tune->td_angle)),
                        std::to_string(tune->evaluations.size()), ""});
    } else {
      t.rows.push_back({format_number(result.speeds[i]), "", "", "", "", "", "",
                        result.tuning_failures[i].empty() ? "not tuned"
                                                          : result.tuning_failures[i]});
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Output bundle

OutputBundle::OutputBundle(fs::path root, std::string config_hash)
    : root_(std::move(root)), config_hash_(std::move(config_hash)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw IoError(root_.string() + ": cannot create output directory: " + ec.message());
}

ManifestEntry OutputBundle::write_text(const fs::path& relative, std::string_view content) {
  if (relative.is_absolute() || relative.empty())
    throw std::invalid_argument("bundle paths must be relative");
  const fs::path target = root_ / relative;
  std::lock_guard lock(mutex_);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw IoError(target.parent_path().string() + ": " + ec.message());
  {
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(target.string() + ": cannot open for writing: " + std::strerror(errno));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError(target.string() + ": write failed: " + std::strerror(errno));
  }
  ManifestEntry e{relative.generic_string(), sha256_hex(content), content.size()};
  const auto it = std::find_if(entries_.begin(), entries_.end(),
                               [&](const ManifestEntry& x) { return x.path == e.path; });
  if (it != entries_.end()) {
    *it = e;
  } else {
    entries_.push_back(e);
  }
  return e;
}

std::vector<ManifestEntry> OutputBundle::entries() const {
  std::lock_guard lock(mutex_);
  auto out = entries_;
  std::sort(out.begin(), out.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  return out;
}

fs::path OutputBundle::write_manifest() {
  nlohmann::json doc;
  doc["config_hash"] = config_hash_;
  doc["files"] = nlohmann::json::array();
  for (const auto& e : entries())
    doc["files"].push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  const fs::path target = root_ / "manifest.json";
  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError(target.string() + ": cannot write manifest: " + std::strerror(errno));
  return target;
}

ManifestEntry write_timeseries(OutputBundle& bundle, std::span<const StrideRecord> records,
                               const fs::path& relative) {
  return bundle.write_text(relative, timeseries_csv(records));
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open: " + std::strerror(errno));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace tslip
