#include "imlab/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "imlab/error.hpp"

namespace imlab {

namespace fs = std::filesystem;

void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename into " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string node_csv(const Grid& grid, const NodeArray& values, const std::vector<std::string>& names) {
  std::string out;
  for (int a = 0; a < grid.dim(); ++a) out += (a ? ",i" : "i") + std::to_string(a);
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    out += ',';
    out += c < static_cast<Eigen::Index>(names.size()) ? names[c] : "c" + std::to_string(c);
  }
  out += '\n';
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto idx = grid.index(k);
    for (int a = 0; a < grid.dim(); ++a) {
      if (a) out += ',';
      out += std::to_string(idx[a]);
    }
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out += ',';
      out += format_double(values(static_cast<Eigen::Index>(k), c));
    }
    out += '\n';
  }
  return out;
}

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

std::string table_csv(const Table& t) {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  emit(t.header);
  for (const auto& r : t.rows) emit(r);
  return out;
}

NodeArray parse_node_csv(const std::string& text, int index_columns) {
  const Table t = parse_csv(text);
  const auto cols = static_cast<Eigen::Index>(t.header.size()) - index_columns;
  if (cols < 1) throw Error(ErrorCode::IoError, "node CSV has no component columns");
  NodeArray out(static_cast<Eigen::Index>(t.rows.size()), cols);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (static_cast<Eigen::Index>(t.rows[r].size()) != cols + index_columns) {
      throw Error(ErrorCode::IoError, "ragged node CSV row " + std::to_string(r));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(static_cast<Eigen::Index>(r), c) = std::stod(t.rows[r][static_cast<std::size_t>(c + index_columns)]);
    }
  }
  return out;
}

std::string trace_csv(const OptimizeTrace& trace) {
  Table t;
  t.header = {"iter", "energy", "stretch", "bend", "grad_norm", "step"};
  for (const auto& r : trace.records) {
    t.rows.push_back({std::to_string(r.iter), format_double(r.energy), format_double(r.stretch),
                      format_double(r.bend), format_double(r.grad_norm), format_double(r.step)});
  }
  return table_csv(t);
}

namespace {

constexpr char kMagic[9] = "IMLAB001";

void put(std::string& out, double x) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

double get(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw Error(ErrorCode::IoError, "binary field truncated");
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  pos += 8;
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string binary_dump(const Grid& grid, const NodeArray& values) {
  std::string out(kMagic, 8);
  put(out, grid.dim());
  for (int a = 0; a < grid.dim(); ++a) put(out, grid.count(a));
  for (int a = 0; a < grid.dim(); ++a) put(out, grid.origin(a));
  for (int a = 0; a < grid.dim(); ++a) put(out, grid.extent(a));
  put(out, static_cast<double>(values.cols()));
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c) put(out, values(r, c));
  return out;
}

BinaryField parse_binary(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 8, kMagic) != 0) {
    throw Error(ErrorCode::IoError, "missing IMLAB001 header");
  }
  std::size_t pos = 8;
  const int d = static_cast<int>(get(bytes, pos));
  if (d < 1 || d > 2) throw Error(ErrorCode::IoError, "bad dimension in binary field");
  std::vector<int> counts(d);
  std::vector<double> origin(d), extents(d);
  for (auto& c : counts) c = static_cast<int>(get(bytes, pos));
  for (auto& o : origin) o = get(bytes, pos);
  for (auto& e : extents) e = get(bytes, pos);
  const auto ncomp = static_cast<Eigen::Index>(get(bytes, pos));
  Grid grid(counts, origin, extents);
  NodeArray values(static_cast<Eigen::Index>(grid.size()), ncomp);
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < ncomp; ++c) values(r, c) = get(bytes, pos);
  if (pos != bytes.size()) throw Error(ErrorCode::IoError, "trailing bytes in binary field");
  return BinaryField{std::move(grid), std::move(values)};
}

std::string obj_mesh(const Grid& grid, const NodeArray& values) {
  if (grid.dim() != 2 || values.cols() != 3) {
    throw Error(ErrorCode::GridMismatch, "OBJ export needs a surface in three coordinates");
  }
  std::string out;
  for (Eigen::Index k = 0; k < values.rows(); ++k) {
    out += "v " + format_double(values(k, 0)) + ' ' + format_double(values(k, 1)) + ' ' +
           format_double(values(k, 2)) + '\n';
  }
  for (int i = 0; i + 1 < grid.count(0); ++i) {
    for (int j = 0; j + 1 < grid.count(1); ++j) {
      const auto a = grid.flat(i, j) + 1, b = grid.flat(i + 1, j) + 1;
      const auto c = grid.flat(i + 1, j + 1) + 1, d = grid.flat(i, j + 1) + 1;
      out += "f " + std::to_string(a) + ' ' + std::to_string(b) + ' ' + std::to_string(c) + '\n';
      out += "f " + std::to_string(a) + ' ' + std::to_string(c) + ' ' + std::to_string(d) + '\n';
    }
  }
  return out;
}

std::string loglog_svg(const std::string& title, const std::string& xlabel, const std::vector<double>& x,
                       const std::vector<PlotSeries>& series) {
  constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (double v : x)
    if (v > 0) xmin = std::min(xmin, std::log10(v)), xmax = std::max(xmax, std::log10(v));
  for (const auto& s : series)
    for (double v : s.y)
      if (v > 0 && std::isfinite(v)) ymin = std::min(ymin, std::log10(v)), ymax = std::max(ymax, std::log10(v));
  if (!(xmax >= xmin)) xmin = 0, xmax = 1;
  if (!(ymax >= ymin)) ymin = 0, ymax = 1;
  if (xmax - xmin < 1e-12) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;
  auto px = [&](double v) { return L + (std::log10(v) - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double v) { return H - B - (std::log10(v) - ymin) / (ymax - ymin) * (H - T - B); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel
    << " (log10 " << format_double(xmin) << " .. " << format_double(xmax) << ")</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = colors[i % 5];
    std::string pts;
    for (std::size_t k = 0; k < x.size() && k < series[i].y.size(); ++k) {
      const double v = series[i].y[k];
      if (!(x[k] > 0) || !(v > 0) || !std::isfinite(v)) continue;
      pts += format_double(px(x[k])) + "," + format_double(py(v)) + " ";
      s << "<circle cx=\"" << px(x[k]) << "\" cy=\"" << py(v) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"" << pts << "\"/>\n";
    s << "<text x=\"" << L + 10 << "\" y=\"" << T + 16 * (i + 1) << "\" font-size=\"12\" fill=\"" << color
      << "\">" << series[i].name << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace imlab
