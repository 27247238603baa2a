#include "shiftbound/plot.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <map>
#include <sstream>

#include "shiftbound/error.h"

namespace shiftbound {

namespace {

constexpr double kPanelW = 420.0;
constexpr double kPanelH = 320.0;
constexpr double kMarginL = 56.0;
constexpr double kMarginT = 36.0;
constexpr double kPlotW = kPanelW - kMarginL - 16.0;
constexpr double kPlotH = kPanelH - kMarginT - 48.0;

const std::map<std::string, std::string> kColors{{"ours", "#1f77b4"},
                                                 {"dro_observable", "#ff7f0e"},
                                                 {"dro_omniscient", "#2ca02c"},
                                                 {"naive", "#7f7f7f"}};

std::string F(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Box {
  double min = 0.0, q1 = 0.0, med = 0.0, q3 = 0.0, max = 0.0;
};

double Quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::optional<Box> MakeBox(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  return Box{v.front(), Quantile(v, 0.25), Quantile(v, 0.5), Quantile(v, 0.75), v.back()};
}

void Panel(std::ostringstream& svg, const ExperimentSummary& e,
           const std::vector<const ResultRow*>& rows, double x0) {
  std::vector<std::string> methods;
  for (const auto& m : e.methods) methods.push_back(m.method);

  std::map<std::string, std::pair<std::optional<Box>, std::optional<Box>>> boxes;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto widen = [&](double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  for (const auto& m : methods) {
    std::vector<double> lows, ups;
    for (const ResultRow* r : rows) {
      if (r->method != m || r->status != "optimal") continue;
      (r->side == "lower" ? lows : ups).push_back(r->value);
      widen(r->value);
    }
    boxes[m] = {MakeBox(lows), MakeBox(ups)};
  }
  widen(e.naive);
  if (e.truth) widen(*e.truth);
  if (!(hi > lo)) {
    const double c = std::isfinite(lo) ? lo : 0.0;
    lo = c - 0.5;
    hi = c + 0.5;
  }
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto Y = [&](double v) { return kMarginT + kPlotH * (hi - v) / (hi - lo); };

  svg << "<g class=\"panel\" transform=\"translate(" << F(x0) << ",0)\">\n";
  svg << "<text x=\"" << F(kPanelW / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">"
      << Escape(e.experiment) << "</text>\n";
  svg << "<rect x=\"" << F(kMarginL) << "\" y=\"" << F(kMarginT) << "\" width=\"" << F(kPlotW)
      << "\" height=\"" << F(kPlotH) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    svg << "<text x=\"" << F(kMarginL - 4) << "\" y=\"" << F(Y(v) + 4)
        << "\" text-anchor=\"end\" font-size=\"10\">" << F(v) << "</text>\n";
  }

  const double slot = kPlotW / static_cast<double>(std::max<std::size_t>(methods.size(), 1));
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const std::string& m = methods[k];
    const std::string color = kColors.count(m) ? kColors.at(m) : "#000000";
    const double cx = kMarginL + slot * (static_cast<double>(k) + 0.5);
    svg << "<g class=\"glyph-group\" data-method=\"" << Escape(m) << "\">\n";
    const MethodSummary* s = e.Method(m);
    if (s && s->ok > 0) {
      svg << "<line class=\"interval\" x1=\"" << F(cx) << "\" y1=\"" << F(Y(s->lower.mean))
          << "\" x2=\"" << F(cx) << "\" y2=\"" << F(Y(s->upper.mean)) << "\" stroke=\"" << color
          << "\" stroke-width=\"3\"/>\n";
    }
    const auto& [blo, bup] = boxes[m];
    for (const auto& b : {blo, bup}) {
      if (!b) continue;
      const double w = std::min(slot * 0.5, 36.0);
      svg << "<g class=\"box\">"
          << "<line x1=\"" << F(cx) << "\" y1=\"" << F(Y(b->min)) << "\" x2=\"" << F(cx)
          << "\" y2=\"" << F(Y(b->max)) << "\" stroke=\"" << color << "\"/>"
          << "<rect x=\"" << F(cx - w / 2) << "\" y=\"" << F(Y(b->q3)) << "\" width=\"" << F(w)
          << "\" height=\"" << F(std::max(Y(b->q1) - Y(b->q3), 1.0)) << "\" fill=\"" << color
          << "\" fill-opacity=\"0.35\" stroke=\"" << color << "\"/>"
          << "<line x1=\"" << F(cx - w / 2) << "\" y1=\"" << F(Y(b->med)) << "\" x2=\""
          << F(cx + w / 2) << "\" y2=\"" << F(Y(b->med)) << "\" stroke=\"" << color
          << "\"/></g>\n";
    }
    svg << "<text x=\"" << F(cx) << "\" y=\"" << F(kMarginT + kPlotH + 16)
        << "\" text-anchor=\"middle\" font-size=\"10\">" << Escape(m) << "</text>\n";
    svg << "</g>\n";
  }

  svg << "<line class=\"naive\" x1=\"" << F(kMarginL) << "\" y1=\"" << F(Y(e.naive)) << "\" x2=\""
      << F(kMarginL + kPlotW) << "\" y2=\"" << F(Y(e.naive))
      << "\" stroke=\"#7f7f7f\" stroke-dasharray=\"4 3\"/>\n";
  if (e.truth) {
    svg << "<line class=\"truth\" x1=\"" << F(kMarginL) << "\" y1=\"" << F(Y(*e.truth))
        << "\" x2=\"" << F(kMarginL + kPlotW) << "\" y2=\"" << F(Y(*e.truth))
        << "\" stroke=\"#d62728\"/>\n";
  }
  svg << "</g>\n";
}

}  // namespace

std::string RenderPlot(const ResultBundle& bundle) {
  if (bundle.experiments.empty()) throw Error(ErrorCode::kEmptyBundle, "nothing to plot");
  const double width = kPanelW * static_cast<double>(bundle.experiments.size());
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << F(width) << "\" height=\""
      << F(kPanelH) << "\" viewBox=\"0 0 " << F(width) << ' ' << F(kPanelH)
      << "\" font-family=\"sans-serif\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < bundle.experiments.size(); ++k) {
    const auto& e = bundle.experiments[k];
    std::vector<const ResultRow*> rows;
    for (const auto& r : bundle.rows) {
      if (r.experiment == e.experiment) rows.push_back(&r);
    }
    Panel(svg, e, rows, kPanelW * static_cast<double>(k));
  }
  svg << "</svg>\n";
  return svg.str();
}

void EmitPlot(const ResultBundle& bundle, const std::filesystem::path& path) {
  const std::string svg = RenderPlot(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << svg;
}

}  // namespace shiftbound
