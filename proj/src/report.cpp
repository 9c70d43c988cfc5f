#include "reuse/report.h"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "reuse/checkpoint.h"

namespace reuse {

using Json = nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// White to deep blue through a fixed set of stops.
std::string ramp(double v) {
  struct Stop { double at; int r, g, b; };
  static constexpr Stop kStops[] = {
      {0.0, 255, 255, 255}, {0.5, 158, 202, 225}, {0.8, 66, 146, 198}, {1.0, 8, 48, 107}};
  v = std::clamp(v, 0.0, 1.0);
  std::size_t i = 1;
  while (i + 1 < std::size(kStops) && v > kStops[i].at) ++i;
  const Stop& a = kStops[i - 1];
  const Stop& b = kStops[i];
  const double t = (v - a.at) / (b.at - a.at);
  auto mix = [t](int x, int y) { return static_cast<int>(x + (y - x) * t + 0.5); };
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b));
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::vector<int> ids_or_default(const std::vector<int>& ids, std::size_t layers) {
  if (!ids.empty()) {
    if (ids.size() != layers) throw std::invalid_argument("layer_ids do not match the table");
    return ids;
  }
  std::vector<int> out(layers);
  for (std::size_t i = 0; i < layers; ++i) out[i] = static_cast<int>(i);
  return out;
}

}  // namespace

std::string encode_capture(const AttentionCapture& capture) {
  const Json header{{"format", "reuse-capture"},
                    {"version", kCaptureVersion},
                    {"L", capture.layers()},
                    {"H", capture.heads()},
                    {"n", capture.seq_len()},
                    {"T", capture.examples()},
                    {"layer_ids", capture.layer_ids()}};
  std::string out = header.dump();
  out.push_back('\n');
  out.reserve(out.size() + std::size_t{8} * capture.examples() * capture.layers() *
                               capture.heads() * capture.seq_len() * capture.seq_len());
  for (int t = 0; t < capture.examples(); ++t) {
    for (const Tensor2D& m : capture.example(t)) {
      for (double v : m.values()) append_f64_le(out, v);
    }
  }
  return out;
}

AttentionCapture decode_capture(std::string_view bytes) {
  const std::size_t newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw std::runtime_error("capture file has no header");
  Json header;
  try {
    header = Json::parse(bytes.substr(0, newline));
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(std::string("capture header: ") + e.what());
  }
  if (header.value("format", "") != "reuse-capture") {
    throw std::runtime_error("not a capture file (format field)");
  }
  if (header.at("version").get<int>() != kCaptureVersion) {
    throw std::runtime_error("unsupported capture version");
  }
  const int layers = header.at("L").get<int>();
  const int heads = header.at("H").get<int>();
  const int n = header.at("n").get<int>();
  const int examples = header.at("T").get<int>();
  if (layers < 1 || heads < 1 || n < 1 || examples < 0) {
    throw std::runtime_error("capture header has non-positive sizes");
  }
  const std::size_t block = std::size_t(n) * n;
  const std::size_t expected = std::size_t(examples) * layers * heads * block * 8;
  const std::string_view payload = bytes.substr(newline + 1);
  if (payload.size() != expected) {
    throw std::runtime_error("capture payload is " + std::to_string(payload.size()) +
                             " bytes, header implies " + std::to_string(expected));
  }
  AttentionCapture capture(layers, heads, n);
  if (header.contains("layer_ids")) capture.set_layer_ids(header.at("layer_ids").get<std::vector<int>>());
  std::size_t offset = 0;
  for (int t = 0; t < examples; ++t) {
    std::vector<Tensor2D> mats;
    mats.reserve(std::size_t(layers) * heads);
    for (int k = 0; k < layers * heads; ++k) {
      Tensor2D m(n, n);
      for (std::size_t i = 0; i < block; ++i, offset += 8) m.data()[i] = read_f64_le(payload, offset);
      mats.push_back(std::move(m));
    }
    capture.add_example(std::move(mats));
  }
  return capture;
}

void save_capture(const std::filesystem::path& path, const AttentionCapture& capture) {
  write_file(path, encode_capture(capture));
}

AttentionCapture load_capture(const std::filesystem::path& path) {
  return decode_capture(read_file(path));
}

Json matrix_to_json(const Tensor2D& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Json similarity_report_json(const SimilarityReport& report) {
  return Json{{"model", report.model},
              {"dataset", report.dataset},
              {"examples", report.examples},
              {"layer_ids", report.layer_ids},
              {"rows", "source layer"},
              {"all_pairs", matrix_to_json(report.all_pairs)},
              {"adjacent_profiles", report.adjacent_profiles},
              {"mean_adjacent_similarity", report.all_pairs.rows() >= 2
                                               ? Json(mean_adjacent_similarity(report.all_pairs))
                                               : Json(nullptr)}};
}

std::string all_pairs_csv(const Tensor2D& all_pairs, const std::vector<int>& layer_ids) {
  const std::vector<int> ids = ids_or_default(layer_ids, all_pairs.rows());
  std::ostringstream out;
  out << "source_layer";
  for (int id : ids) out << ",target_" << id;
  out << '\n';
  for (std::size_t r = 0; r < all_pairs.rows(); ++r) {
    out << ids[r];
    for (std::size_t c = 0; c < all_pairs.cols(); ++c) out << ',' << csv_number(all_pairs(r, c));
    out << '\n';
  }
  return out.str();
}

std::string adjacent_profiles_csv(const std::vector<std::vector<double>>& profiles,
                                  const std::vector<int>& layer_ids) {
  const std::vector<int> ids = ids_or_default(layer_ids, profiles.size() + 1);
  std::ostringstream out;
  out << "layer";
  const std::size_t heads = profiles.empty() ? 0 : profiles.front().size();
  for (std::size_t k = 1; k <= heads; ++k) out << ",rank_" << k;
  out << '\n';
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    out << ids[i + 1];
    for (double v : profiles[i]) out << ',' << csv_number(v);
    out << '\n';
  }
  return out.str();
}

std::string convergence_csv(const std::vector<ConvergencePoint>& points,
                            const std::vector<int>& layer_ids) {
  std::ostringstream out;
  out << "examples,source_layer,target_layer,similarity\n";
  for (const ConvergencePoint& p : points) {
    const std::vector<int> ids = ids_or_default(layer_ids, p.all_pairs.rows());
    for (std::size_t r = 0; r < p.all_pairs.rows(); ++r) {
      for (std::size_t c = 0; c < p.all_pairs.cols(); ++c) {
        out << p.examples << ',' << ids[r] << ',' << ids[c] << ',' << csv_number(p.all_pairs(r, c))
            << '\n';
      }
    }
  }
  return out.str();
}

std::string heatmap_svg(const Tensor2D& all_pairs, const std::vector<int>& layer_ids,
                        std::string_view title) {
  const std::vector<int> ids = ids_or_default(layer_ids, all_pairs.rows());
  const int layers = static_cast<int>(all_pairs.rows());
  constexpr int kCell = 48;
  constexpr int kLeft = 70;
  constexpr int kTop = 50;
  constexpr int kLegend = 200;
  const int grid = layers * kCell;
  const int width = kLeft + grid + 40 + kLegend;
  const int height = kTop + grid + 60;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"15\">" << escape_xml(title)
      << "</text>\n";
  for (int r = 0; r < layers; ++r) {
    for (int c = 0; c < layers; ++c) {
      const double v = all_pairs(r, c);
      const int x = kLeft + c * kCell;
      const int y = kTop + r * kCell;
      svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\""
          << kCell << "\" fill=\"" << ramp(v) << "\" stroke=\"#888888\" stroke-width=\"0.5\"/>\n";
      svg << "<text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 4
          << "\" text-anchor=\"middle\" fill=\"" << (v > 0.6 ? "#ffffff" : "#000000") << "\">"
          << fixed(v, 2) << "</text>\n";
    }
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << kTop + r * kCell + kCell / 2 + 4
        << "\" text-anchor=\"end\">L" << ids[r] << "</text>\n";
    svg << "<text x=\"" << kLeft + r * kCell + kCell / 2 << "\" y=\"" << kTop + grid + 18
        << "\" text-anchor=\"middle\">L" << ids[r] << "</text>\n";
  }
  const int lx = kLeft + grid + 40;
  svg << "<text x=\"" << lx << "\" y=\"" << kTop + 12 << "\">rows: source layer l</text>\n";
  svg << "<text x=\"" << lx << "\" y=\"" << kTop + 30 << "\">columns: target layer l'</text>\n";
  for (int i = 0; i <= 10; ++i) {
    const double v = 1.0 - i / 10.0;
    const int y = kTop + 44 + i * 14;
    svg << "<rect x=\"" << lx << "\" y=\"" << y << "\" width=\"18\" height=\"14\" fill=\""
        << ramp(v) << "\"/>\n";
    if (i % 5 == 0) {
      svg << "<text x=\"" << lx + 24 << "\" y=\"" << y + 11 << "\">" << fixed(v, 1) << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace reuse
