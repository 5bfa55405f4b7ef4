#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fdeq/bounds.hpp"
#include "fdeq/fdesolver.hpp"
#include "fdeq/montecarlo.hpp"
#include "fdeq/nclattice.hpp"
#include "fdeq/weingarten.hpp"

using namespace fdeq;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// ---- reproducibility manifest --------------------------------------------

std::string read_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha1_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr))
    fail(ErrorKind::Io, "SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// Records the command, its parameters and every input byte; the hash covers all
// of them. Wall-clock timings are deliberately absent so reruns are byte-identical.
struct Manifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> params;
  std::string inputs;  // concatenated input contents, hashed

  void param(const std::string& k, const std::string& v) { params.emplace_back(k, v); }
  void input(const std::string& label, const std::string& bytes) {
    inputs += label;
    inputs += '\0';
    inputs += std::to_string(bytes.size());
    inputs += '\0';
    inputs += bytes;
  }
  std::string hash() const {
    std::string all = command;
    for (const auto& [k, v] : params) all += '\0' + k + '=' + v;
    return sha1_hex(all + '\0' + inputs);
  }
  json to_json() const {
    json j;
    j["command"] = command;
    for (const auto& [k, v] : params) j["params"][k] = v;
    j["content_sha1"] = hash();
    return j;
  }
  void write_csv_header(std::ostream& out) const {
    out << "# fdeq " << command << '\n';
    for (const auto& [k, v] : params) out << "# " << k << ' ' << v << '\n';
    out << "# content_sha1 " << hash() << '\n';
  }
};

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- model files ----------------------------------------------------------

struct LoadedModel {
  ModelSpec spec;
  Manifest* manifest = nullptr;
};

[[noreturn]] void model_error(const std::string& path, const std::string& field, const std::string& msg) {
  fail(ErrorKind::Parse, path + ": " + field + ": " + msg);
}

const json& require(const json& j, const char* key, const std::string& path, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) model_error(path, where, std::string("missing field '") + key + "'");
  return j.at(key);
}

int get_int(const json& j, const std::string& path, const std::string& where) {
  if (!j.is_number_integer()) model_error(path, where, "expected an integer");
  return j.get<int>();
}

double get_double(const json& j, const std::string& path, const std::string& where) {
  if (!j.is_number()) model_error(path, where, "expected a number");
  return j.get<double>();
}

CMatrix matrix_from_entry(const json& e, const std::string& path, const std::string& where, Manifest& man) {
  std::string file = require(e, "file", path, where).get<std::string>();
  fs::path p = fs::path(file).is_absolute() ? fs::path(file) : fs::path(path).parent_path() / file;
  std::string bytes = read_file(p.string(), "matrix file for " + where);
  man.input(where, bytes);
  std::istringstream in(bytes);
  return parse_matrix_csv(in, p.string());
}

ModelSpec load_model(const std::string& path, Manifest& man) {
  std::string text = read_file(path, "model file");
  man.input("model", text);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, path + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  ModelSpec m;
  m.N = get_int(require(j, "N", path, "model"), path, "N");
  const json& sizes = require(j, "sizes", path, "model");
  if (!sizes.is_array()) model_error(path, "sizes", "expected an array");
  for (std::size_t i = 0; i < sizes.size(); ++i) m.sizes.push_back(get_int(sizes[i], path, "sizes[" + std::to_string(i) + "]"));
  const int k = static_cast<int>(m.sizes.size());
  if (j.contains("k") && get_int(j["k"], path, "k") != k)
    model_error(path, "k", "does not match the length of 'sizes'");
  const json& H = require(j, "H", path, "model");
  const json& T = require(j, "T", path, "model");
  if (!H.is_array() || static_cast<int>(H.size()) != k) model_error(path, "H", "expected an array of k entries");
  if (!T.is_array() || static_cast<int>(T.size()) != k) model_error(path, "T", "expected an array of k entries");
  for (int i = 0; i < k; ++i) {
    const std::string hw = "H[" + std::to_string(i) + "]", tw = "T[" + std::to_string(i) + "]";
    const int Ni = m.sizes[i];
    const json& h = H[i];
    if (h.contains("file")) {
      m.H.push_back(matrix_from_entry(h, path, hw, man));
    } else {
      std::string kind = require(h, "kind", path, hw).get<std::string>();
      if (kind == "identity") {
        m.H.push_back(CMatrix::Identity(m.N, Ni));
      } else if (kind == "gaussian") {
        auto seed = static_cast<std::uint64_t>(get_int(require(h, "seed", path, hw), path, hw + ".seed"));
        double scale = h.contains("scale") ? get_double(h["scale"], path, hw + ".scale") : 1.0;
        std::mt19937_64 rng(seed);
        m.H.push_back(complex_gaussian(m.N, Ni, rng) * scale);
      } else {
        model_error(path, hw + ".kind", "unknown kind '" + kind + "' (use file, identity or gaussian)");
      }
    }
    const json& t = T[i];
    if (t.contains("file")) {
      m.T.push_back(matrix_from_entry(t, path, tw, man));
    } else {
      std::string kind = require(t, "kind", path, tw).get<std::string>();
      if (kind != "diag") model_error(path, tw + ".kind", "unknown kind '" + kind + "' (use file or diag)");
      const json& v = require(t, "values", path, tw);
      if (!v.is_array() || v.empty()) model_error(path, tw + ".values", "expected a non-empty array");
      if (static_cast<int>(v.size()) > Ni)
        model_error(path, tw + ".values", "has " + std::to_string(v.size()) + " entries but N_i = " + std::to_string(Ni));
      CMatrix D = CMatrix::Zero(static_cast<int>(v.size()), static_cast<int>(v.size()));
      for (std::size_t q = 0; q < v.size(); ++q)
        D(q, q) = get_double(v[q], path, tw + ".values[" + std::to_string(q) + "]");
      // shorter value lists describe a rectangular T, zero-padded to N_i
      m.T.push_back(pad_rectangular_T(D, Ni).T);
    }
  }
  m.validate();
  return m;
}

// ---- grids and spectral CSV -----------------------------------------------

LineGrid parse_grid(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() != 4) fail(ErrorKind::Grid, "--grid expects xmin,xmax,points,eta; got '" + s + "'");
  LineGrid g;
  try {
    std::size_t used = 0;
    g.x_min = std::stod(parts[0]);
    g.x_max = std::stod(parts[1]);
    g.points = std::stoi(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("points");
    g.eta = std::stod(parts[3]);
  } catch (const std::exception&) {
    fail(ErrorKind::Grid, "--grid expects numbers xmin,xmax,points,eta; got '" + s + "'");
  }
  g.points_z();  // validates
  return g;
}

struct SpectralTable {
  std::vector<cplx> z, G;
  std::vector<double> density, cdf;
};

void write_spectral_csv(const std::string& path, const Manifest& man, const SpectralTable& t,
                        const std::vector<double>* se_re = nullptr, const std::vector<double>* se_im = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
  man.write_csv_header(out);
  out << "z_re,z_im,G_re,G_im,density,cdf";
  if (se_re) out << ",se_re,se_im";
  out << '\n';
  for (std::size_t i = 0; i < t.z.size(); ++i) {
    out << fmt(t.z[i].real()) << ',' << fmt(t.z[i].imag()) << ',' << fmt(t.G[i].real()) << ',' << fmt(t.G[i].imag())
        << ',' << fmt(t.density[i]) << ',' << fmt(t.cdf[i]);
    if (se_re) out << ',' << fmt((*se_re)[i]) << ',' << fmt((*se_im)[i]);
    out << '\n';
  }
}

SpectralTable read_spectral_csv(const std::string& path, std::string* bytes_out) {
  std::string bytes = read_file(path, "spectral CSV");
  if (bytes_out) *bytes_out = bytes;
  std::istringstream in(bytes);
  SpectralTable t;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("z_re,z_im,G_re,G_im,density,cdf", 0) != 0)
        fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": expected the column header z_re,z_im,G_re,G_im,density,cdf");
      header = true;
      continue;
    }
    std::vector<double> v;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        v.push_back(cell == "nan" ? std::nan("") : std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
    }
    if (v.size() < 6) fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": expected at least 6 columns");
    t.z.emplace_back(v[0], v[1]);
    t.G.emplace_back(v[2], v[3]);
    t.density.push_back(v[4]);
    t.cdf.push_back(v[5]);
  }
  if (t.z.empty()) fail(ErrorKind::Parse, path + ": no data rows");
  return t;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

// moments of the tabulated density on the grid window
json grid_moments(const SpectralTable& t, int order) {
  std::vector<double> mom(order + 1, 0.0);
  for (std::size_t i = 1; i < t.z.size(); ++i) {
    double x0 = t.z[i - 1].real(), x1 = t.z[i].real();
    for (int k = 0; k <= order; ++k)
      mom[k] += 0.5 * (x1 - x0) * (std::pow(x0, k) * t.density[i - 1] + std::pow(x1, k) * t.density[i]);
  }
  json j;
  j["captured_mass"] = mom[0];
  j["moments"] = json::array();
  for (int k = 1; k <= order; ++k) j["moments"].push_back(mom[k]);
  return j;
}

// ---- subcommands ----------------------------------------------------------

struct SolveArgs {
  std::string model, grid, out, summary, method = "newton";
};

int cmd_solve(const SolveArgs& a) {
  Manifest man;
  man.command = "solve";
  man.param("model", a.model);
  man.param("grid", a.grid);
  man.param("method", a.method);
  ModelSpec model = load_model(a.model, man);
  LineGrid grid = parse_grid(a.grid);
  SolveOptions opt;
  if (a.method == "picard")
    opt.method = SolverMethod::Picard;
  else if (a.method != "newton")
    fail(ErrorKind::Parameter, "--method must be newton or picard");
  FdeSystem sys(model);
  auto res = solve_grid(sys, grid.points_z(), opt);
  SpectralTable t{res.spectral.z, res.spectral.G, res.spectral.density, res.spectral.cdf};
  write_spectral_csv(a.out, man, t);

  json s;
  s["manifest"] = man.to_json();
  s["points"] = t.z.size();
  s["failed"] = res.failed;
  double rmax = 0.0, rsum = 0.0;
  int imin = 0, imax = 0, cont = 0;
  long isum = 0;
  std::size_t ok = 0;
  json per = json::array();
  for (const auto& p : res.points) {
    if (!p) {
      per.push_back(nullptr);
      continue;
    }
    if (ok == 0) imin = imax = p->iterations;
    rmax = std::max(rmax, p->residual);
    rsum += p->residual;
    imin = std::min(imin, p->iterations);
    imax = std::max(imax, p->iterations);
    isum += p->iterations;
    cont += p->continuation ? 1 : 0;
    per.push_back(p->iterations);
    ++ok;
  }
  s["residual"] = {{"max", rmax}, {"mean", ok ? rsum / ok : 0.0}};
  s["iterations"] = {{"min", imin}, {"max", imax}, {"mean", ok ? double(isum) / ok : 0.0}, {"per_point", per}};
  s["continuation_points"] = cont;
  s["raw_mass"] = res.spectral.raw_mass;
  s["grid_moments"] = grid_moments(t, 4);
  if (!a.summary.empty()) write_json(a.summary, s);
  if (!res.failed.empty()) {
    std::cerr << "fdeq solve: no convergence at " << res.failed.size() << " of " << t.z.size() << " grid points\n";
    return 1;
  }
  return 0;
}

struct SimulateArgs {
  std::string model, grid, out, summary;
  int trials = 100;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  Manifest man;
  man.command = "simulate";
  man.param("model", a.model);
  man.param("grid", a.grid);
  man.param("trials", std::to_string(a.trials));
  man.param("seed", std::to_string(a.seed));
  ModelSpec model = load_model(a.model, man);
  LineGrid grid = parse_grid(a.grid);
  if (a.trials < 1) fail(ErrorKind::Parameter, "--trials must be at least 1");
  auto spectra = simulate_spectra(model, McConfig{a.trials, a.seed});
  auto zs = grid.points_z();
  auto emp = empirical_cauchy(spectra, zs);
  std::vector<double> xs;
  for (auto z : zs) xs.push_back(z.real());
  SpectralTable t{zs, emp.spectral.G, {}, empirical_cdf(spectra, xs)};
  for (auto g : t.G) t.density.push_back(-g.imag() / M_PI);
  write_spectral_csv(a.out, man, t, &emp.se_re, &emp.se_im);
  if (!a.summary.empty()) {
    json s;
    s["manifest"] = man.to_json();
    s["trials"] = a.trials;
    double lo = spectra[0].minCoeff(), hi = spectra[0].maxCoeff();
    for (const auto& ev : spectra) lo = std::min(lo, ev.minCoeff()), hi = std::max(hi, ev.maxCoeff());
    s["eigenvalue_range"] = {lo, hi};
    s["max_standard_error"] = {{"re", *std::max_element(emp.se_re.begin(), emp.se_re.end())},
                               {"im", *std::max_element(emp.se_im.begin(), emp.se_im.end())}};
    s["grid_moments"] = grid_moments(t, 4);
    write_json(a.summary, s);
  }
  return 0;
}

struct CompareArgs {
  std::string fde, emp, report;
  double c1 = 1.0, c2 = 2.0;
  double rho = -1.0;
};

int cmd_compare(const CompareArgs& a) {
  Manifest man;
  man.command = "compare";
  man.param("fde", a.fde);
  man.param("emp", a.emp);
  std::string b1, b2;
  auto f = read_spectral_csv(a.fde, &b1);
  auto e = read_spectral_csv(a.emp, &b2);
  man.input("fde", b1);
  man.input("emp", b2);
  if (f.z.size() != e.z.size())
    fail(ErrorKind::Grid, "grids differ in length (" + std::to_string(f.z.size()) + " vs " + std::to_string(e.z.size()) +
                              "); rerun both with the same --grid flag");
  for (std::size_t i = 0; i < f.z.size(); ++i)
    if (std::abs(f.z[i] - e.z[i]) > 1e-12 * std::max(1.0, std::abs(f.z[i])))
      fail(ErrorKind::Grid, "grids differ at row " + std::to_string(i + 1) + "; rerun both with the same --grid flag");
  check_line_grid(f.z);
  double sup = 0.0, at = f.z[0].real(), integral = 0.0, dmax = 0.0;
  std::vector<double> absdiff;
  for (std::size_t i = 0; i < f.z.size(); ++i) {
    double d = std::abs(f.G[i] - e.G[i]);
    absdiff.push_back(d);
    if (d > sup) sup = d, at = f.z[i].real();
    dmax = std::max(dmax, f.density[i]);
    if (i) integral += 0.5 * (f.z[i].real() - f.z[i - 1].real()) * (absdiff[i] + absdiff[i - 1]);
  }
  const double eta = f.z[0].imag();
  const double rho = a.rho >= 0 ? a.rho : dmax;
  json r;
  man.param("c1", fmt(a.c1));
  man.param("c2", fmt(a.c2));
  man.param("rho", fmt(rho));
  r["manifest"] = man.to_json();
  r["points"] = f.z.size();
  r["sup_abs_G_diff"] = sup;
  r["argmax_x"] = at;
  r["kolmogorov"] = kolmogorov_distance(f.cdf, e.cdf);
  // Bai-type estimate on the grid window: c1 (int |G_fde - G_emp| dx + 16 rho eta)
  BaiBound bb;
  bb.integral = integral;
  bb.regularity = 16.0 * rho * eta;
  bb.bound = a.c1 * (bb.integral + bb.regularity);
  r["extension"] = {{"eta", eta},
                    {"window", {f.z.front().real(), f.z.back().real()}},
                    {"rho", rho},
                    {"c1", a.c1},
                    {"integral_abs_G_diff", bb.integral},
                    {"regularity", bb.regularity},
                    {"bai_bound", bb.bound}};
  write_json(a.report, r);
  return 0;
}

struct MomentsArgs {
  int n = 2, N = 4;
  bool nc_count = false, wg = false, opval = false;
  std::uint64_t seed = 1;
};

std::string type_str(const std::vector<int>& t) {
  std::string s;
  for (std::size_t i = 0; i < t.size(); ++i) s += (i ? "," : "") + std::to_string(t[i]);
  return s;
}

int cmd_moments(const MomentsArgs& a) {
  if (a.n < 1 || a.n > 6) fail(ErrorKind::Size, "--n must lie in 1..6");
  const bool all = !a.nc_count && !a.wg && !a.opval;
  if (a.nc_count || all) std::cout << "nc_count " << enumerate_nc_labels(a.n).size() << '\n';
  if (a.wg || all) {
    const auto& t = weingarten_table(a.n, a.N);
    for (const auto& [type, v] : t.by_type) std::cout << "wg " << type_str(type) << ' ' << fmt(v) << '\n';
  }
  if (a.opval || all) {
    // two blocks of sizes N and 2N, random hermitian D and C, paths from block 1
    std::mt19937_64 rng(a.seed);
    const int M = 3 * a.N;
    auto herm = [&] {
      CMatrix X = complex_gaussian(M, M, rng);
      return CMatrix((X + X.adjoint()) / std::sqrt(2.0 * M));
    };
    CMatrix D = herm(), C = herm();
    auto mc = block_path_moment(D, C, {a.N, 2 * a.N}, a.n, 1);
    std::cout << "finite " << format_complex(mc.finite) << '\n';
    std::cout << "asymptotic " << format_complex(mc.asymptotic) << '\n';
    std::cout << "difference " << fmt(std::abs(mc.finite - mc.asymptotic)) << '\n';
  }
  return 0;
}

struct NcArgs {
  int n = 4;
  bool list = false;
};

int cmd_nc(const NcArgs& a) {
  if (a.n < 1 || a.n > 10) fail(ErrorKind::Size, "--n must lie in 1..10");
  auto parts = enumerate_nc(a.n);
  std::cout << "count " << parts.size() << '\n';
  std::cout << "catalan " << catalan(a.n) << '\n';
  bool kr = true;
  for (const auto& p : parts) kr = kr && p.size() + kreweras(p).size() == static_cast<std::size_t>(a.n + 1);
  std::cout << "kreweras_block_sum " << (kr ? "ok" : "FAIL") << '\n';
  if (a.n <= 7) {
    bool mob = true;
    auto zero = zero_partition(a.n);
    for (const auto& p : parts) {
      long long prod = 1;
      for (const auto& b : p.blocks) {
        int s = static_cast<int>(b.size());
        prod *= ((s - 1) % 2 ? -1 : 1) * static_cast<long long>(catalan(s - 1));
      }
      mob = mob && mobius(zero, p) == prod;
    }
    std::cout << "mobius_product_formula " << (mob ? "ok" : "FAIL") << '\n';
  }
  if (a.list)
    for (const auto& p : parts) std::cout << p.str() << '\n';
  return kr ? 0 : 1;
}

SpectralMeasure read_measure(const std::string& path, std::string* bytes_out) {
  std::string bytes = read_file(path, "measure file");
  if (bytes_out) *bytes_out = bytes;
  std::istringstream in(bytes);
  std::vector<double> loc, w;
  std::string line;
  std::size_t lineno = 0;
  bool weighted = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    std::vector<double> v;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
    }
    if (v.empty() || v.size() > 2) fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": expected location[,weight]");
    if (!loc.empty() && weighted != (v.size() == 2))
      fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": either every row or no row carries a weight");
    weighted = v.size() == 2;
    loc.push_back(v[0]);
    w.push_back(weighted ? v[1] : 1.0);
  }
  if (loc.empty()) fail(ErrorKind::Parse, path + ": no atoms");
  double total = 0.0;
  for (double x : w) total += x;
  if (!weighted)
    for (double& x : w) x /= total;
  try {
    return SpectralMeasure(loc, w);
  } catch (const Error& e) {
    fail(ErrorKind::Parse, path + ": " + e.what());
  }
}

struct BoundsArgs {
  std::string mu, nu, report;
  double R = 10.0, beta = 0.5, c = 0.5, T = 5.0, c1 = 1.0, c2 = 2.0, rho = -1.0;
};

int cmd_bounds(const BoundsArgs& a) {
  Manifest man;
  man.command = "bounds";
  man.param("mu", a.mu);
  man.param("nu", a.nu);
  for (auto [k, v] : std::vector<std::pair<std::string, double>>{
           {"R", a.R}, {"beta", a.beta}, {"c", a.c}, {"T", a.T}, {"c1", a.c1}, {"c2", a.c2}, {"rho", a.rho}})
    man.param(k, fmt(v));
  std::string b1, b2;
  auto mu = read_measure(a.mu, &b1);
  auto nu = read_measure(a.nu, &b2);
  man.input("mu", b1);
  man.input("nu", b2);
  auto p = choose_constants(a.beta, a.c, a.R, a.T);
  const double A = std::max({std::abs(mu.lo()), std::abs(mu.hi()), std::abs(nu.lo()), std::abs(nu.hi())});
  ComplexFn diff = [&](cplx z) { return cauchy(mu, z) - cauchy(nu, z); };
  auto sup = sup_on_delta_R(diff, a.R, A);
  json r;
  r["manifest"] = man.to_json();
  r["constants"] = {{"r0", p.r0}, {"a", p.a}, {"eta0", p.eta0}, {"m0", p.m0}};
  r["sup_delta_R"] = {{"sup", sup.sup},
                      {"m", std::isinf(sup.m) ? json("inf") : json(sup.m)},
                      {"circle_R", sup.circle_R},
                      {"segments", sup.segments},
                      {"circle_3R", sup.circle_3R}};
  auto rep = verify_extension(diff, p, sup.m);
  rep.kolmogorov = kolmogorov_distance(mu, nu);
  r["report"] = {{"m", std::isinf(rep.m) ? json("inf") : json(rep.m)},
                 {"interval", {{"x_lo", rep.x_lo}, {"x_hi", rep.x_hi}, {"height", rep.height}}},
                 {"bound", rep.bound},
                 {"measured_max", rep.measured_max},
                 {"kolmogorov", rep.kolmogorov},
                 {"applicable", rep.applicable},
                 {"violation", rep.violation}};
  if (a.rho >= 0 && rep.applicable) {
    auto bb = bai_bound(diff, a.rho, rep.height, a.c1, a.c2, A);
    r["bai"] = {{"eta", rep.height},
                {"integral", bb.integral},
                {"regularity", bb.regularity},
                {"bound", bb.bound},
                {"theta_over_m_beta", 16.0 * a.c1 * a.rho * p.eta0 / std::pow(rep.m, a.beta)}};
  }
  write_json(a.report, r);
  return rep.violation ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free deterministic equivalents of Phi = sum_i H_i U_i T_i U_i^* H_i^*"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: FDE_THREADS or all cores)")->check(CLI::NonNegativeNumber);

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "solve the fixed-point equations on a line grid");
  solve->add_option("--model", sa.model, "model JSON")->required();
  solve->add_option("--grid", sa.grid, "xmin,xmax,points,eta")->required();
  solve->add_option("--out", sa.out, "spectral CSV")->required();
  solve->add_option("--summary", sa.summary, "summary JSON");
  solve->add_option("--method", sa.method, "newton or picard");

  SimulateArgs ma;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo simulation of the random matrix model");
  sim->add_option("--model", ma.model, "model JSON")->required();
  sim->add_option("--grid", ma.grid, "xmin,xmax,points,eta")->required();
  sim->add_option("--out", ma.out, "empirical spectral CSV")->required();
  sim->add_option("--summary", ma.summary, "summary JSON");
  sim->add_option("--trials", ma.trials, "number of trials");
  sim->add_option("--seed", ma.seed, "64-bit seed");

  CompareArgs ca;
  auto* cmp = app.add_subcommand("compare", "compare FDE and empirical spectral CSVs");
  cmp->add_option("--fde", ca.fde, "CSV from solve")->required();
  cmp->add_option("--emp", ca.emp, "CSV from simulate")->required();
  cmp->add_option("--report", ca.report, "report JSON (stdout if omitted)");
  cmp->add_option("--c1", ca.c1, "Bai constant c1");
  cmp->add_option("--c2", ca.c2, "Bai constant c2");
  cmp->add_option("--rho", ca.rho, "Lipschitz constant of the FDE CDF (default: max FDE density)");

  MomentsArgs oa;
  auto* mom = app.add_subcommand("moments", "Weingarten tables, NC counts and finite-N vs large-N moments");
  mom->add_option("--n", oa.n, "order, 1..6");
  mom->add_option("--N", oa.N, "dimension");
  mom->add_flag("--nc-count", oa.nc_count, "print |NC(n)|");
  mom->add_flag("--wg", oa.wg, "print Wg(N, .) by cycle type");
  mom->add_flag("--opval", oa.opval, "finite-N against large-N operator-valued moment");
  mom->add_option("--seed", oa.seed, "seed of the random test matrices");

  NcArgs na;
  auto* nc = app.add_subcommand("nc", "non-crossing partition lattice checks");
  nc->add_option("--n", na.n, "size, 1..10");
  nc->add_flag("--list", na.list, "print every partition");

  BoundsArgs ba;
  auto* bnd = app.add_subcommand("bounds", "Cauchy-transform extension and Kolmogorov bounds for two atomic measures");
  bnd->add_option("--mu", ba.mu, "measure CSV: location[,weight] per line")->required();
  bnd->add_option("--nu", ba.nu, "measure CSV")->required();
  bnd->add_option("--report", ba.report, "report JSON (stdout if omitted)");
  bnd->add_option("--R", ba.R, "radius of the region |z| > R");
  bnd->add_option("--beta", ba.beta, "exponent beta in (0,1)");
  bnd->add_option("--c", ba.c, "constant c in (0,1)");
  bnd->add_option("--T", ba.T, "half-width of the target interval");
  bnd->add_option("--c1", ba.c1, "Bai constant c1");
  bnd->add_option("--c2", ba.c2, "Bai constant c2");
  bnd->add_option("--rho", ba.rho, "Lipschitz constant of F_mu; enables the Bai bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (threads > 0) set_threads(threads);
    if (*solve) return cmd_solve(sa);
    if (*sim) return cmd_simulate(ma);
    if (*cmp) return cmd_compare(ca);
    if (*mom) return cmd_moments(oa);
    if (*nc) return cmd_nc(na);
    if (*bnd) return cmd_bounds(ba);
  } catch (const Error& e) {
    std::cerr << "fdeq: " << e.what() << '\n';
    return e.is_input_error() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "fdeq: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
