#pragma once

#include <string>
#include <vector>

#include "imlab/fields.hpp"
#include "imlab/optimize.hpp"

namespace imlab {

/// Write through a sibling temporary file and rename into place.
/// Throws Error(IoError).
void write_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Shortest text that keeps 17 significant digits ("%.17g").
std::string format_double(double x);

/// One row per node: index tuple, then the components. Column names default
/// to c0, c1, ...
std::string node_csv(const Grid& grid, const NodeArray& values,
                     const std::vector<std::string>& names = {});
/// Parse the component columns of node_csv output (index columns dropped).
NodeArray parse_node_csv(const std::string& text, int index_columns);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
std::string table_csv(const Table& t);
Table parse_csv(const std::string& text);

std::string trace_csv(const OptimizeTrace& trace);

/// "IMLAB001" followed by little-endian doubles: d, counts, origin, extents,
/// component count, then the row-major node array.
std::string binary_dump(const Grid& grid, const NodeArray& values);
struct BinaryField {
  Grid grid;
  NodeArray values;
};
/// Throws Error(IoError) on malformed input.
BinaryField parse_binary(const std::string& bytes);

/// Wavefront OBJ of a surface sampled on a 2-d grid; each quad becomes two
/// triangles.
std::string obj_mesh(const Grid& grid, const NodeArray& values);

struct PlotSeries {
  std::string name;
  std::vector<double> y;
};
/// Log-log line plot of several series over a common x axis. Non-positive
/// values are skipped.
std::string loglog_svg(const std::string& title, const std::string& xlabel, const std::vector<double>& x,
                       const std::vector<PlotSeries>& series);

}  // namespace imlab
