// Generates reference-solution grids in the CSV format the registry loads:
// header dim0,dim1,...,u0 followed by row-major lattice points. Burgers comes
// from the Cole-Hopf quadrature, Heat from its separable closed form.

#include <cstdio>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "featpinn/pde.hpp"

namespace {

int write_burgers(const std::string& path, int nx, int nt) {
  std::ofstream f(path);
  if (!f) {
    std::fprintf(stderr, "cannot open %s\n", path.c_str());
    return 1;
  }
  f << "dim0,dim1,u0\n";
  const double nu = 0.01 / 3.14159265358979323846;
  for (int i = 0; i < nx; ++i) {
    const double x = -1.0 + 2.0 * i / (nx - 1);
    for (int j = 0; j < nt; ++j) {
      const double t = static_cast<double>(j) / (nt - 1);
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", x, t,
                    featpinn::burgers_reference(x, t, nu));
      f << buf;
    }
  }
  return 0;
}

int write_heat(const std::string& path, int nx, int nt) {
  std::ofstream f(path);
  if (!f) {
    std::fprintf(stderr, "cannot open %s\n", path.c_str());
    return 1;
  }
  f << "dim0,dim1,dim2,u0\n";
  for (int i = 0; i < nx; ++i) {
    const double x = static_cast<double>(i) / (nx - 1);
    for (int j = 0; j < nx; ++j) {
      const double y = static_cast<double>(j) / (nx - 1);
      for (int k = 0; k < nt; ++k) {
        const double t = 5.0 * k / (nt - 1);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", x, y, t,
                      featpinn::heat_reference(x, y, t));
        f << buf;
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"featpinn-make-reference: write benchmark reference grids"};
  std::string problem;
  std::string out = "reference.csv";
  int nx = 201;
  int nt = 101;
  app.add_option("--problem", problem, "burgers or heat")->required();
  app.add_option("--out", out, "output CSV path");
  app.add_option("--nx", nx, "spatial resolution per axis");
  app.add_option("--nt", nt, "temporal resolution");
  CLI11_PARSE(app, argc, argv);

  if (problem == "burgers") return write_burgers(out, nx, nt);
  if (problem == "heat") return write_heat(out, nx, nt);
  std::fprintf(stderr, "unknown problem '%s' (expected burgers or heat)\n", problem.c_str());
  return 2;
}
