#ifndef LMCE_FIELD_IO_HPP
#define LMCE_FIELD_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lmce/fields.hpp"

namespace lmce {

// Field file format: one header line
//   # nx ny hx hy ox oy components
// followed by nx lines (row i = x1 index), each holding ny*components
// comma-separated values ordered by j then component. Values are printed
// with %.17g so a write/read cycle reproduces doubles bit for bit.
// Node masks are not serialized; readers get the rectangle default.

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_planes(std::ostream& os, const Grid& g,
                         const std::vector<const Plane<double>*>& planes) {
  os << "# " << g.nx << ' ' << g.ny << ' ' << format_double(g.hx) << ' '
     << format_double(g.hy) << ' ' << format_double(g.ox) << ' '
     << format_double(g.oy) << ' ' << planes.size() << '\n';
  for (int i = 0; i < g.nx; ++i) {
    for (int j = 0; j < g.ny; ++j)
      for (std::size_t c = 0; c < planes.size(); ++c) {
        if (j != 0 || c != 0) os << ',';
        os << format_double((*planes[c])(i, j));
      }
    os << '\n';
  }
}

struct ParsedField {
  GridPtr grid;
  std::vector<Plane<double>> planes;
};

inline ParsedField read_planes(std::istream& is, const std::string& origin) {
  std::string line;
  if (!std::getline(is, line) || line.empty() || line[0] != '#')
    throw ValidationError("io.bad_header", origin + ": missing '#' header line");
  std::istringstream hs(line.substr(1));
  int nx = 0, ny = 0;
  double hx = 0, hy = 0, ox = 0, oy = 0;
  int comps = 0;
  if (!(hs >> nx >> ny >> hx >> hy >> ox >> oy >> comps))
    throw ValidationError("io.bad_header", origin + ": header needs nx ny hx hy ox oy components");
  if (comps < 1 || comps > 3)
    throw ValidationError("io.bad_header", origin + ": component count must be 1..3");
  auto grid = make_rectangle(nx, ny, hx, hy, ox, oy);
  ParsedField out;
  out.grid = grid;
  out.planes.assign(comps, Plane<double>::Zero(nx, ny));
  for (int i = 0; i < nx; ++i) {
    if (!std::getline(is, line))
      throw ValidationError("io.short_file", origin + ": expected " + std::to_string(nx) + " data rows");
    std::istringstream ls(line);
    std::string cell;
    for (int j = 0; j < ny; ++j)
      for (int c = 0; c < comps; ++c) {
        if (!std::getline(ls, cell, ','))
          throw ValidationError("io.short_row", origin + ": row " + std::to_string(i) + " is too short");
        try {
          out.planes[std::size_t(c)](i, j) = std::stod(cell);
        } catch (const std::exception&) {
          throw ValidationError("io.bad_number", origin + ": unparsable value '" + cell + "'");
        }
      }
  }
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("io.open_failed", "cannot open " + path);
  return is;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("io.open_failed", "cannot write " + path);
  return os;
}

} // namespace detail

inline void write_field(std::ostream& os, const ScalarField& f) {
  detail::write_planes(os, *f.grid, {&f.values});
}
inline void write_field(std::ostream& os, const VectorField& f) {
  detail::write_planes(os, *f.grid, {&f.c1, &f.c2});
}
inline void write_field(std::ostream& os, const SymMatrixField& f) {
  detail::write_planes(os, *f.grid, {&f.a11, &f.a12, &f.a22});
}

template <typename Field>
void save_field(const std::string& path, const Field& f) {
  auto os = detail::open_out(path);
  write_field(os, f);
  if (!os) throw ValidationError("io.write_failed", "write failed for " + path);
}

inline ScalarField read_scalar_field(std::istream& is, const std::string& origin = "<stream>") {
  auto p = detail::read_planes(is, origin);
  if (p.planes.size() != 1)
    throw ValidationError("io.wrong_components", origin + ": expected 1 component");
  ScalarField f;
  f.grid = p.grid;
  f.values = std::move(p.planes[0]);
  return f;
}

inline VectorField read_vector_field(std::istream& is, const std::string& origin = "<stream>") {
  auto p = detail::read_planes(is, origin);
  if (p.planes.size() != 2)
    throw ValidationError("io.wrong_components", origin + ": expected 2 components");
  VectorField f;
  f.grid = p.grid;
  f.c1 = std::move(p.planes[0]);
  f.c2 = std::move(p.planes[1]);
  return f;
}

inline SymMatrixField read_sym_field(std::istream& is, const std::string& origin = "<stream>") {
  auto p = detail::read_planes(is, origin);
  if (p.planes.size() != 3)
    throw ValidationError("io.wrong_components", origin + ": expected 3 components");
  SymMatrixField f;
  f.grid = p.grid;
  f.a11 = std::move(p.planes[0]);
  f.a12 = std::move(p.planes[1]);
  f.a22 = std::move(p.planes[2]);
  return f;
}

inline ScalarField load_scalar_field(const std::string& path) {
  auto is = detail::open_in(path);
  return read_scalar_field(is, path);
}
inline VectorField load_vector_field(const std::string& path) {
  auto is = detail::open_in(path);
  return read_vector_field(is, path);
}
inline SymMatrixField load_sym_field(const std::string& path) {
  auto is = detail::open_in(path);
  return read_sym_field(is, path);
}

} // namespace lmce

#endif
