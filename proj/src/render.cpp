#include "aerr/render.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace aerr {

namespace {

constexpr double kPx = 16.0;  // pixels per cell
constexpr double kPad = 24.0;
constexpr double kGap = 32.0;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

const char* cell_fill(char c) {
  switch (c) {
    case '.': return "#ffffff";
    case '#': return "#4a4a4a";
    case 'D': return "#b5835a";
    case 'S': return "#8e6bbf";
    default: return "#d9d9d9";
  }
}

std::string state_color(const StateLogEntry& e) {
  if (e.approach) return "#d62728";
  if (e.state.rfind("Recovery", 0) == 0) return "#ff7f0e";
  if (e.state.rfind("Reminiscing", 0) == 0) return "#2ca02c";
  return "#1f77b4";
}

struct Panel {
  int floor = 0;
  std::vector<std::string> rows;
  nlohmann::json frontiers = nlohmann::json::array();
  nlohmann::json keypoints = nlohmann::json::array();
  double x0 = 0.0;
  int width = 0;
  int height = 0;
};

}  // namespace

std::string render_svg(const EpisodeLog& log, const MultiFloorWorld* world) {
  std::vector<Panel> panels;
  if (log.summary.contains("floors")) {
    for (const auto& f : log.summary.at("floors")) {
      Panel p;
      p.floor = f.at("floor").get<int>();
      p.rows = f.at("map").get<std::vector<std::string>>();
      p.frontiers = f.value("frontiers", nlohmann::json::array());
      p.keypoints = f.value("keypoints", nlohmann::json::array());
      panels.push_back(std::move(p));
    }
  }
  if (panels.empty() && world) {
    for (std::size_t i = 0; i < world->floors.size(); ++i) {
      Panel p;
      p.floor = static_cast<int>(i);
      p.rows.assign(static_cast<std::size_t>(world->floors[i].height),
                    std::string(static_cast<std::size_t>(world->floors[i].width), '?'));
      panels.push_back(std::move(p));
    }
  }

  double x = kPad;
  double max_h = 0.0;
  for (auto& p : panels) {
    p.height = static_cast<int>(p.rows.size());
    p.width = p.rows.empty() ? 0 : static_cast<int>(p.rows.front().size());
    p.x0 = x;
    x += p.width * kPx + kGap;
    max_h = std::max(max_h, p.height * kPx);
  }
  const double total_w = std::max(x - kGap + kPad, 2 * kPad);
  const double total_h = max_h + 2 * kPad + 40.0;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_w << "\" height=\"" << total_h
      << "\" viewBox=\"0 0 " << total_w << ' ' << total_h << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << total_w << "\" height=\"" << total_h << "\" fill=\"#f4f4f4\"/>\n";
  const std::string scenario = log.header.value("scenario", std::string{});
  const std::string target = log.header.value("target", std::string{});
  std::string outcome;
  if (log.summary.contains("result")) {
    outcome = log.summary.at("result").value("success", false) ? "success" : "failure";
    outcome += ", " + std::to_string(log.summary.at("result").value("steps", 0)) + " steps";
  }
  svg << "<text x=\"" << kPad << "\" y=\"16\" font-family=\"monospace\" font-size=\"12\">"
      << escape(scenario + " | target: " + target + (outcome.empty() ? "" : " | " + outcome)) << "</text>\n";

  const double y0 = kPad;
  for (const auto& p : panels) {
    svg << "<g id=\"floor-" << p.floor << "\">\n";
    svg << "<text x=\"" << p.x0 << "\" y=\"" << y0 + p.height * kPx + 16 << "\" font-family=\"monospace\" "
        << "font-size=\"12\">floor " << p.floor << "</text>\n";
    for (int r = 0; r < p.height; ++r) {
      for (int c = 0; c < p.width && c < static_cast<int>(p.rows[r].size()); ++c) {
        svg << "<rect x=\"" << p.x0 + c * kPx << "\" y=\"" << y0 + r * kPx << "\" width=\"" << kPx
            << "\" height=\"" << kPx << "\" fill=\"" << cell_fill(p.rows[r][c]) << "\" stroke=\"#eeeeee\" "
            << "stroke-width=\"0.5\"/>\n";
      }
    }
    if (world && p.floor >= 0 && p.floor < static_cast<int>(world->floors.size())) {
      for (const auto& fc : world->target_cells()) {
        if (fc.floor != p.floor) continue;
        const double cx = p.x0 + (fc.cell.x + 0.5) * kPx;
        const double cy = y0 + (fc.cell.y + 0.5) * kPx;
        svg << "<circle class=\"target\" cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << kPx * 0.4
            << "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
      }
    }
    for (const auto& f : p.frontiers) {
      const double cx = p.x0 + (f.at(0).get<int>() + 0.5) * kPx;
      const double cy = y0 + (f.at(1).get<int>() + 0.5) * kPx;
      svg << "<circle class=\"frontier\" cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << kPx * 0.25
          << "\" fill=\"#17becf\"/>\n";
    }
    for (const auto& k : p.keypoints) {
      const auto& cell = k.at("cell");
      const double cx = p.x0 + (cell.at(0).get<int>() + 0.5) * kPx;
      const double cy = y0 + (cell.at(1).get<int>() + 0.5) * kPx;
      const double h = kPx * 0.35;
      svg << "<polygon class=\"keypoint\" points=\"" << cx << ',' << cy - h << ' ' << cx + h << ',' << cy << ' '
          << cx << ',' << cy + h << ' ' << cx - h << ',' << cy << "\" fill=\"#bcbd22\" stroke=\"#333333\" "
          << "stroke-width=\"0.5\"/>\n";
    }

    // One segment per step, colored by the state that chose the action.
    std::map<int, const StateLogEntry*> last_tick;
    for (const auto& e : log.entries) {
      if (e.action) last_tick[e.step] = &e;
    }
    const StateLogEntry* prev = nullptr;
    for (const auto& [step, e] : last_tick) {
      if (prev && prev->pose.floor == p.floor && e->pose.floor == p.floor) {
        svg << "<line x1=\"" << p.x0 + prev->pose.position.x() / kCellSize * kPx << "\" y1=\""
            << y0 + prev->pose.position.y() / kCellSize * kPx << "\" x2=\""
            << p.x0 + e->pose.position.x() / kCellSize * kPx << "\" y2=\""
            << y0 + e->pose.position.y() / kCellSize * kPx << "\" stroke=\"" << state_color(*prev)
            << "\" stroke-width=\"2\" stroke-linecap=\"round\"/>\n";
      }
      prev = e;
    }
    if (!last_tick.empty()) {
      const auto* first = last_tick.begin()->second;
      if (first->pose.floor == p.floor) {
        svg << "<circle class=\"start\" cx=\"" << p.x0 + first->pose.position.x() / kCellSize * kPx << "\" cy=\""
            << y0 + first->pose.position.y() / kCellSize * kPx << "\" r=\"4\" fill=\"#000000\"/>\n";
      }
    }
    svg << "</g>\n";
  }

  const double ly = total_h - 12;
  const std::pair<const char*, const char*> legend[] = {
      {"#1f77b4", "exploration"}, {"#ff7f0e", "recovery"}, {"#2ca02c", "reminiscing"}, {"#d62728", "approach"}};
  double lx = kPad;
  for (const auto& [color, name] : legend) {
    svg << "<rect x=\"" << lx << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << lx + 14 << "\" y=\"" << ly << "\" font-family=\"monospace\" font-size=\"11\">" << name
        << "</text>\n";
    lx += 110;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace aerr
