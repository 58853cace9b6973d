#include "tslip/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace tslip {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 170;  // legend column
constexpr double kTop = 40;
constexpr double kBottom = 55;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const char* colour(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

struct Range {
  double lo{std::numeric_limits<double>::infinity()};
  double hi{-std::numeric_limits<double>::infinity()};

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) {
      const double pad = std::max(std::abs(lo) * 0.1, 0.5);
      lo -= pad;
      hi += pad;
    }
  }
};

std::vector<double> ticks(const Range& r) {
  const double raw = (r.hi - r.lo) / 6;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(r.lo / step) * step; t <= r.hi + 1e-9 * step; t += step)
    out.push_back(t);
  return out;
}

class Canvas {
 public:
  Canvas(const std::string& title, Range x, Range y) : x_(x), y_(y) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
         << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
         << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         << "<text x=\"" << fmt(kLeft) << "\" y=\"22\" font-size=\"14\">" << escape_xml(title)
         << "</text>\n";
  }

  double px(double x) const {
    return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom);
  }

  void axes(const std::string& x_label, const std::string& y_label, bool x_ticks = true) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    out_ << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y1) << "\" width=\"" << fmt(x1 - x0)
         << "\" height=\"" << fmt(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
    if (x_ticks)
      for (double t : ticks(x_)) {
        out_ << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(px(t))
             << "\" y2=\"" << fmt(y0 + 5) << "\" stroke=\"black\"/>\n"
             << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(y0 + 18)
             << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
      }
    for (double t : ticks(y_)) {
      out_ << "<line x1=\"" << fmt(x0 - 5) << "\" y1=\"" << fmt(py(t)) << "\" x2=\"" << fmt(x1)
           << "\" y2=\"" << fmt(py(t)) << "\" stroke=\"#dddddd\"/>\n"
           << "<text x=\"" << fmt(x0 - 8) << "\" y=\"" << fmt(py(t) + 4)
           << "\" text-anchor=\"end\">" << tick_label(t) << "</text>\n";
    }
    if (y_.lo < 0 && y_.hi > 0)
      out_ << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(py(0)) << "\" x2=\"" << fmt(x1)
           << "\" y2=\"" << fmt(py(0)) << "\" stroke=\"#888888\"/>\n";
    out_ << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"" << fmt(kHeight - 15)
         << "\" text-anchor=\"middle\">" << escape_xml(x_label) << "</text>\n"
         << "<text transform=\"translate(18," << fmt((y0 + y1) / 2)
         << ") rotate(-90)\" text-anchor=\"middle\">" << escape_xml(y_label) << "</text>\n";
  }

  void polyline(const std::vector<double>& x, const std::vector<double>& y, const char* stroke,
                bool dashed) {
    out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.6\""
         << (dashed ? " stroke-dasharray=\"6 3\"" : "") << " points=\"";
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std::isfinite(x[i]) && std::isfinite(y[i]))
        out_ << fmt(px(x[i])) << ',' << fmt(py(y[i])) << ' ';
    out_ << "\"/>\n";
  }

  void dots(const std::vector<double>& x, const std::vector<double>& y, const char* fill) {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std::isfinite(x[i]) && std::isfinite(y[i]))
        out_ << "<circle cx=\"" << fmt(px(x[i])) << "\" cy=\"" << fmt(py(y[i]))
             << "\" r=\"3\" fill=\"" << fill << "\"/>\n";
  }

  void band(const ShadedBand& b) {
    out_ << "<polygon fill=\"#cccccc\" fill-opacity=\"0.6\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < b.x.size(); ++i) out_ << fmt(px(b.x[i])) << ',' << fmt(py(b.hi[i])) << ' ';
    for (std::size_t i = b.x.size(); i-- > 0;) out_ << fmt(px(b.x[i])) << ',' << fmt(py(b.lo[i])) << ' ';
    out_ << "\"/>\n";
  }

  void vertical(double x, const std::string& label) {
    out_ << "<line x1=\"" << fmt(px(x)) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(px(x))
         << "\" y2=\"" << fmt(kHeight - kBottom) << "\" stroke=\"#555555\" stroke-dasharray=\"2 3\"/>\n"
         << "<text x=\"" << fmt(px(x) + 3) << "\" y=\"" << fmt(kTop + 12) << "\">"
         << escape_xml(label) << "</text>\n";
  }

  void rect(double x, double y, double w, double h, const char* fill) {
    out_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
         << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, const char* anchor = "start") {
    out_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" text-anchor=\"" << anchor
         << "\">" << escape_xml(s) << "</text>\n";
  }

  void legend(std::size_t row, const std::string& label, const char* stroke, bool dashed,
              bool filled = false) {
    const double x = kWidth - kRight + 12;
    const double y = kTop + 10 + 18.0 * static_cast<double>(row);
    if (filled) {
      rect(x, y - 6, 20, 10, stroke);
    } else {
      out_ << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(x + 20)
           << "\" y2=\"" << fmt(y) << "\" stroke=\"" << stroke << "\" stroke-width=\"2\""
           << (dashed ? " stroke-dasharray=\"6 3\"" : "") << "/>\n";
    }
    text(x + 26, y + 4, label);
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  Range x_, y_;
  std::ostringstream out_;
};

std::string axis_label(const std::string& label, const std::string& unit) {
  return unit.empty() || unit == "-" ? label : label + " [" + unit + "]";
}

std::string radius_label(double r) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "r_VP = %+.0f cm", 100 * r);
  return buf;
}

std::vector<const SweepCell*> column_at(const SweepResult& result, double speed) {
  std::vector<const SweepCell*> out;
  for (const SweepCell& c : result.cells)
    if (c.speed == speed && c.converged && c.stride) out.push_back(&c);
  return out;
}

LinePlot per_radius_speed_plot(const SweepResult& result, const std::string& title,
                               const std::string& label, const std::string& unit,
                               double (*value)(const StrideMetrics&)) {
  LinePlot p{title, "speed", "m/s", label, unit, {}, {}, {}};
  for (double r : result.vp_radii) {
    Series s{radius_label(r), {}, {}, r < 0, true};
    for (double v : result.speeds) {
      const SweepCell& c = result.cell(r, v);
      if (!c.converged || !c.metrics) continue;
      s.x.push_back(v);
      s.y.push_back(value(*c.metrics));
    }
    p.series.push_back(std::move(s));
  }
  return p;
}

}  // namespace

std::string render_svg(const LinePlot& plot) {
  Range x, y;
  for (const auto& s : plot.series) {
    for (double v : s.x) x.add(v);
    for (double v : s.y) y.add(v);
  }
  for (const auto& b : plot.bands) {
    for (double v : b.x) x.add(v);
    for (double v : b.lo) y.add(v);
    for (double v : b.hi) y.add(v);
  }
  for (const auto& m : plot.markers) x.add(m.second);
  x.settle();
  y.settle();
  const double pad = 0.05 * (y.hi - y.lo);
  y.lo -= pad;
  y.hi += pad;

  Canvas c(plot.title, x, y);
  for (const auto& b : plot.bands) c.band(b);
  c.axes(axis_label(plot.x_label, plot.x_unit), axis_label(plot.y_label, plot.y_unit));
  std::size_t row = 0;
  for (const auto& b : plot.bands) c.legend(row++, b.label, "#cccccc", false, true);
  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const Series& s = plot.series[i];
    c.polyline(s.x, s.y, colour(i), s.dashed);
    if (s.markers) c.dots(s.x, s.y, colour(i));
    c.legend(row++, s.label, colour(i), s.dashed);
  }
  for (const auto& [label, at] : plot.markers) c.vertical(at, label);
  return c.finish();
}

std::string render_svg(const BarChart& chart) {
  Range y;
  y.add(0);
  for (const auto& s : chart.values)
    for (double v : s) y.add(v);
  y.settle();
  const double pad = 0.05 * (y.hi - y.lo);
  y.lo -= pad;
  y.hi += pad;
  const double groups = static_cast<double>(std::max<std::size_t>(chart.categories.size(), 1));
  Canvas c(chart.title, Range{0, groups}, y);
  c.axes("", axis_label(chart.y_label, chart.y_unit), false);
  const double plot_w = kWidth - kLeft - kRight;
  const double group_w = plot_w / groups;
  const double bar_w = 0.8 * group_w / static_cast<double>(std::max<std::size_t>(chart.series.size(), 1));
  for (std::size_t g = 0; g < chart.categories.size(); ++g) {
    const double gx = kLeft + group_w * static_cast<double>(g) + 0.1 * group_w;
    for (std::size_t s = 0; s < chart.series.size(); ++s) {
      const double v = chart.values[s][g];
      if (!std::isfinite(v)) continue;
      const double top = c.py(std::max(v, 0.0));
      const double bottom = c.py(std::min(v, 0.0));
      c.rect(gx + bar_w * static_cast<double>(s), top, bar_w * 0.92, bottom - top, colour(s));
    }
    c.text(gx + 0.4 * group_w, kHeight - kBottom + 18, chart.categories[g], "middle");
  }
  for (std::size_t s = 0; s < chart.series.size(); ++s)
    c.legend(s, chart.series[s], colour(s), false, true);
  return c.finish();
}

CsvTable plot_table(const LinePlot& plot) {
  CsvTable t;
  t.columns = {"series", plot.x_label, plot.y_label};
  t.units = {"-", plot.x_unit.empty() ? "-" : plot.x_unit, plot.y_unit.empty() ? "-" : plot.y_unit};
  for (const auto& s : plot.series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      t.rows.push_back({s.label, format_number(s.x[i]), format_number(s.y[i])});
  for (const auto& b : plot.bands)
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      t.rows.push_back({b.label + " lower", format_number(b.x[i]), format_number(b.lo[i])});
      t.rows.push_back({b.label + " upper", format_number(b.x[i]), format_number(b.hi[i])});
    }
  for (const auto& [label, at] : plot.markers)
    t.rows.push_back({label, format_number(at), ""});
  return t;
}

CsvTable plot_table(const BarChart& chart) {
  CsvTable t;
  t.columns = {"category", "series", chart.y_label};
  t.units = {"-", "-", chart.y_unit.empty() ? "-" : chart.y_unit};
  for (std::size_t s = 0; s < chart.series.size(); ++s)
    for (std::size_t g = 0; g < chart.categories.size(); ++g)
      t.rows.push_back({chart.categories[g], chart.series[s], format_number(chart.values[s][g])});
  return t;
}

LinePlot pitch_trajectory_plot(std::span<const StrideRecord> strides) {
  LinePlot p{"Trunk pitch", "time", "s", "pitch", "deg", {}, {}, {}};
  Series s{"pitch", {}, {}, false, false};
  for (const StrideRecord& r : strides) {
    for (const Sample& x : r.samples) {
      s.x.push_back(x.time);
      s.y.push_back(rad2deg(x.state.pitch));
    }
    p.markers.emplace_back("TD", r.events.touchdown);
    p.markers.emplace_back("TO", r.events.takeoff);
  }
  p.series.push_back(std::move(s));
  return p;
}

LinePlot grf_overlay_plot(const StrideRecord& stride) {
  const GrfDecomposition d = grf_decompose(stride);
  LinePlot p{"Ground reaction force", "stance", "%", "GRF", "N", {}, {}, {}};
  const double t0 = stride.events.touchdown;
  const double span = stride.events.takeoff - t0;
  Series names[6] = {{"GRF_x", {}, {}, false, false},
                     {"GRF_x without damping", {}, {}, true, false},
                     {"GRF_x without hip", {}, {}, true, false},
                     {"GRF_y", {}, {}, false, false},
                     {"GRF_y without damping", {}, {}, true, false},
                     {"GRF_y without hip", {}, {}, true, false}};
  for (const auto& c : d.samples) {
    const double pct = 100 * (c.time - t0) / span;
    const double vals[6] = {c.total.x(), c.without_damping.x(), c.without_hip.x(),
                            c.total.y(), c.without_damping.y(), c.without_hip.y()};
    for (int i = 0; i < 6; ++i) {
      names[i].x.push_back(pct);
      names[i].y.push_back(vals[i]);
    }
  }
  for (auto& s : names) p.series.push_back(std::move(s));
  p.markers.emplace_back("MS", 100 * (stride.events.midstance - t0) / span);
  return p;
}

LinePlot energy_timecourse_plot(const StrideRecord& stride) {
  const EnergyTimecourse e = energy_timecourse(stride);
  LinePlot p{"Cumulative energy over stance", "stance", "%", "energy", "J", {}, {}, {}};
  p.series.push_back({"hip", e.stance_percent, e.hip, false, false});
  p.series.push_back({"damper", e.stance_percent, e.damper, false, false});
  p.series.push_back({"spring", e.stance_percent, e.spring, true, false});
  p.markers.emplace_back("MS", e.midstance_percent);
  if (e.reversal_percent) p.markers.emplace_back("hip reversal", *e.reversal_percent);
  return p;
}

LinePlot excursion_speed_plot(const SweepResult& result) {
  return per_radius_speed_plot(result, "Trunk angular excursion", "excursion", "deg",
                               [](const StrideMetrics& m) { return m.trunk.angular_excursion; });
}

LinePlot angular_velocity_speed_plot(const SweepResult& result) {
  return per_radius_speed_plot(result, "Mean trunk angular velocity", "mean angular velocity",
                               "deg/s",
                               [](const StrideMetrics& m) { return m.trunk.mean_angular_velocity; });
}

LinePlot peak_rate_speed_plot(const SweepResult& result) {
  return per_radius_speed_plot(result, "Peak trunk angular rate", "peak angular rate", "deg/s",
                               [](const StrideMetrics& m) { return m.trunk.peak_angular_velocity; });
}

LinePlot duty_factor_speed_plot(const SweepResult& result, const DutyFactorSchedule& schedule) {
  LinePlot p{"Duty factor", "speed", "m/s", "duty factor", "-", {}, {}, {}};
  ShadedBand band{"target band", {}, {}, {}};
  Series tuned{"tuned r_VP = 0", {}, {}, false, true};
  for (std::size_t i = 0; i < result.speeds.size(); ++i) {
    const double v = result.speeds[i];
    const DutyFactorBand b = schedule.at(v);
    band.x.push_back(v);
    band.lo.push_back(b.lo);
    band.hi.push_back(b.hi);
    if (result.tunings[i]) {
      tuned.x.push_back(v);
      tuned.y.push_back(result.tunings[i]->duty_factor);
    }
  }
  p.bands.push_back(std::move(band));
  p.series.push_back(std::move(tuned));
  return p;
}

LinePlot pitch_comparison_plot(const SweepResult& result, double speed) {
  char title[64];
  std::snprintf(title, sizeof title, "Trunk pitch over the stride at %g m/s", speed);
  LinePlot p{title, "stride from touchdown", "%", "pitch - mean", "deg", {}, {}, {}};
  for (const SweepCell* c : column_at(result, speed)) {
    const StrideRecord& r = *c->stride;
    const double T = r.period();
    Series s{radius_label(c->vp_radius), {}, {}, c->vp_radius < 0, false};
    std::vector<std::pair<double, double>> pts;
    for (const Sample& x : r.samples) {
      double phase = std::fmod(x.time - r.events.touchdown, T);
      if (phase < 0) phase += T;
      pts.emplace_back(100 * phase / T, rad2deg(x.state.pitch - r.mean_pitch));
    }
    std::sort(pts.begin(), pts.end());
    for (const auto& [a, b] : pts) {
      s.x.push_back(a);
      s.y.push_back(b);
    }
    p.series.push_back(std::move(s));
  }
  if (!p.series.empty()) {
    const SweepCell* c = column_at(result, speed).front();
    const StrideRecord& r = *c->stride;
    p.markers.emplace_back("TO", 100 * (r.events.takeoff - r.events.touchdown) / r.period());
  }
  return p;
}

LinePlot energy_comparison_plot(const SweepResult& result, double speed) {
  char title[64];
  std::snprintf(title, sizeof title, "Cumulative hip energy at %g m/s", speed);
  LinePlot p{title, "stance", "%", "hip energy", "J", {}, {}, {}};
  for (const SweepCell* c : column_at(result, speed)) {
    const EnergyTimecourse e = energy_timecourse(*c->stride);
    p.series.push_back({radius_label(c->vp_radius), e.stance_percent, e.hip, c->vp_radius < 0, false});
  }
  p.markers.emplace_back("MS", 50);
  return p;
}

BarChart work_distribution_chart(const SweepResult& result, double speed) {
  char title[64];
  std::snprintf(title, sizeof title, "Work per stride at %g m/s", speed);
  BarChart b{title, "work", "J", {}, {"leg +", "leg -", "leg net", "hip +", "hip -", "hip net"}, {}};
  b.values.resize(b.series.size());
  for (const SweepCell* c : column_at(result, speed)) {
    char label[32];
    std::snprintf(label, sizeof label, "%+.0f cm", 100 * c->vp_radius);
    b.categories.emplace_back(label);
    const WorkLedger& w = c->metrics->work;
    const double vals[6] = {w.leg.positive, w.leg.negative, w.leg.net,
                            w.hip.positive, w.hip.negative, w.hip.net};
    for (std::size_t s = 0; s < 6; ++s) b.values[s].push_back(vals[s]);
  }
  return b;
}

void write_plot(OutputBundle& bundle, const std::filesystem::path& stem, const LinePlot& plot) {
  bundle.write_text(stem.string() + ".svg", render_svg(plot));
  bundle.write_text(stem.string() + ".csv", write_csv(plot_table(plot)));
}

void write_plot(OutputBundle& bundle, const std::filesystem::path& stem, const BarChart& chart) {
  bundle.write_text(stem.string() + ".svg", render_svg(chart));
  bundle.write_text(stem.string() + ".csv", write_csv(plot_table(chart)));
}

}  // namespace tslip
