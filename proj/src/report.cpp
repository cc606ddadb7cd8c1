#include "trajgan/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "trajgan/config.hpp"
#include "trajgan/error.hpp"

namespace trajgan {

namespace {

// Shortest text that reads back to the same double.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

constexpr const char* kReportedTag = "reported, not reproduced";

}  // namespace

void write_eval_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "name,k,n_trajectories,ade,fde,fde_mean_abs,source\n";
  for (const auto& r : reports) {
    out << '"' << r.name << "\"," << r.k << ',' << r.n_trajectories << ',' << num(r.ade) << ',' << num(r.fde)
        << ',' << num(r.fde_mean_abs) << ",measured\n";
  }
  for (const auto& p : kReportedResults) {
    out << '"' << p.model << "\",20,," << num(p.ade) << ',' << num(p.fde) << ",,\"" << kReportedTag << "\"\n";
  }
}

void write_per_class_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "name,k,class,n,ade,fde\n";
  for (const auto& r : reports) {
    for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
      const auto& m = r.per_class[static_cast<std::size_t>(c)];
      if (m.n == 0) continue;
      out << '"' << r.name << "\"," << r.k << ",\"" << class_name(c) << "\"," << m.n << ',' << num(m.ade) << ','
          << num(m.fde) << '\n';
    }
  }
}

std::string format_eval_table(std::span<const EvalReport> reports) {
  std::size_t width = 5;
  for (const auto& r : reports) width = std::max(width, r.name.size() + 6);
  for (const auto& p : kReportedResults) width = std::max(width, std::string(p.model).size());
  std::ostringstream s;
  s << std::left << std::setw(static_cast<int>(width)) << "Model" << std::right << std::setw(10) << "ADE"
    << std::setw(10) << "FDE" << std::setw(8) << "n" << '\n';
  s << std::string(width + 28, '-') << '\n';
  for (const auto& r : reports) {
    s << std::left << std::setw(static_cast<int>(width)) << (r.name + " (k=" + std::to_string(r.k) + ")")
      << std::right << std::setw(10) << fixed(r.ade, 3) << std::setw(10) << fixed(r.fde, 3) << std::setw(8)
      << r.n_trajectories << '\n';
    for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
      const auto& m = r.per_class[static_cast<std::size_t>(c)];
      if (m.n == 0) continue;
      s << std::left << std::setw(static_cast<int>(width)) << ("  " + std::string(class_name(c))) << std::right
        << std::setw(10) << fixed(m.ade, 3) << std::setw(10) << fixed(m.fde, 3) << std::setw(8) << m.n << '\n';
    }
  }
  s << '\n' << "Reference values on the full Stanford Drone dataset (" << kReportedTag << "):\n";
  for (const auto& p : kReportedResults) {
    s << std::left << std::setw(static_cast<int>(width)) << p.model << std::right << std::setw(10) << fixed(p.ade, 2)
      << std::setw(10) << fixed(p.fde, 2) << '\n';
  }
  return s.str();
}

void write_histogram_csv(std::ostream& out, const ClassHistogram& histogram) {
  out << "class,tracks,percent\n";
  for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
    out << '"' << class_name(c) << "\"," << histogram.counts[static_cast<std::size_t>(c)] << ','
        << fixed(histogram.percent(c), 4) << '\n';
  }
}

std::string format_histogram(const ClassHistogram& histogram) {
  std::ostringstream s;
  const std::size_t total = histogram.total();
  for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
    const double pct = histogram.percent(c);
    s << std::left << std::setw(14) << class_name(c) << std::right << std::setw(8)
      << histogram.counts[static_cast<std::size_t>(c)] << std::setw(9) << fixed(pct, 2) << "%  "
      << std::string(static_cast<std::size_t>(std::lround(pct / 2.0)), '#') << '\n';
  }
  s << std::left << std::setw(14) << "total" << std::right << std::setw(8) << total << '\n';
  return s.str();
}

void write_pca_csv(std::ostream& out, const PcaResult& pca) {
  out << "class,pc1,pc2\n";
  for (std::size_t i = 0; i < pca.coords.size(); ++i) {
    out << '"' << class_name(static_cast<int>(i)) << "\"," << num(pca.coords[i][0]) << ',' << num(pca.coords[i][1])
        << '\n';
  }
}

void write_matrix_csv(std::ostream& out, const std::vector<std::vector<double>>& matrix) {
  out << "class";
  for (std::size_t j = 0; j < matrix.size(); ++j) out << ",\"" << class_name(static_cast<int>(j)) << '"';
  out << '\n';
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out << '"' << class_name(static_cast<int>(i)) << '"';
    for (double v : matrix[i]) out << ',' << num(v);
    out << '\n';
  }
}

std::string svg_scatter(const std::string& title, std::span<const SvgPoint> points) {
  constexpr double W = 480, H = 400, M = 50;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  for (const auto& p : points) {
    x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
  }
  const double sx = (x1 - x0) > 0 ? (W - 2 * M) / (x1 - x0) : 1.0;
  const double sy = (y1 - y0) > 0 ? (H - 2 * M) / (y1 - y0) : 1.0;
  auto px = [&](double x) { return M + (x - x0) * sx; };
  auto py = [&](double y) { return H - M - (y - y0) * sy; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << xml_escape(title) << "</text>\n";
  s << "<line x1=\"" << fixed(px(x0), 2) << "\" y1=\"" << fixed(py(0), 2) << "\" x2=\"" << fixed(px(x1), 2)
    << "\" y2=\"" << fixed(py(0), 2) << "\" stroke=\"#bbb\"/>\n";
  s << "<line x1=\"" << fixed(px(0), 2) << "\" y1=\"" << fixed(py(y0), 2) << "\" x2=\"" << fixed(px(0), 2)
    << "\" y2=\"" << fixed(py(y1), 2) << "\" stroke=\"#bbb\"/>\n";
  for (const auto& p : points) {
    s << "<circle cx=\"" << fixed(px(p.x), 2) << "\" cy=\"" << fixed(py(p.y), 2)
      << "\" r=\"5\" fill=\"#1f77b4\"/>\n";
    s << "<text x=\"" << fixed(px(p.x) + 8, 2) << "\" y=\"" << fixed(py(p.y) - 6, 2)
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(p.label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string svg_bars(const std::string& title, std::span<const std::pair<std::string, double>> bars) {
  constexpr double W = 480, H = 320, M = 50;
  double top = 0.0;
  for (const auto& b : bars) top = std::max(top, b.second);
  if (top <= 0.0) top = 1.0;
  const double slot = bars.empty() ? 0.0 : (W - 2 * M) / static_cast<double>(bars.size());

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << xml_escape(title) << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double h = (H - 2 * M) * bars[i].second / top;
    const double x = M + slot * static_cast<double>(i) + slot * 0.15;
    s << "<rect x=\"" << fixed(x, 2) << "\" y=\"" << fixed(H - M - h, 2) << "\" width=\"" << fixed(slot * 0.7, 2)
      << "\" height=\"" << fixed(h, 2) << "\" fill=\"#ff7f0e\"/>\n";
    s << "<text x=\"" << fixed(x + slot * 0.35, 2) << "\" y=\"" << fixed(H - M + 16, 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(bars[i].first)
      << "</text>\n";
    s << "<text x=\"" << fixed(x + slot * 0.35, 2) << "\" y=\"" << fixed(H - M - h - 4, 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(bars[i].second, 3)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string file_checksum(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  std::ostringstream s;
  s << in.rdbuf();
  return fnv1a_hex(s.str());
}

nlohmann::json file_checksums(std::span<const std::filesystem::path> files) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& f : files) out[f.generic_string()] = file_checksum(f);
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace trajgan
