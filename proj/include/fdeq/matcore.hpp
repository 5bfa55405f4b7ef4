#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace fdeq {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

struct Tolerances {
  double singular_pivot = 1e-14;  // relative to max|A|
  double hermitian = 1e-12;       // relative to max|A|
};

inline double max_abs(const CMatrix& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

inline bool is_hermitian(const CMatrix& A, double rel_tol = Tolerances{}.hermitian) {
  if (A.rows() != A.cols()) return false;
  double scale = max_abs(A);
  if (scale == 0.0) return true;
  return (A - A.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline CMatrix symmetrize(const CMatrix& A) { return (A + A.adjoint()) * 0.5; }

inline cplx trace(const CMatrix& A) {
  if (A.rows() != A.cols())
    fail(ErrorKind::Dimension, "trace of a " + std::to_string(A.rows()) + "x" +
                                   std::to_string(A.cols()) + " matrix");
  return A.trace();
}

inline CMatrix solve_linear(const CMatrix& A, const CMatrix& B, const Tolerances& tol = {}) {
  if (A.rows() != A.cols()) fail(ErrorKind::Dimension, "solve_linear: A is not square");
  if (B.rows() != A.rows()) fail(ErrorKind::Dimension, "solve_linear: row count of B differs from A");
  if (A.rows() == 0) return B;
  Eigen::PartialPivLU<CMatrix> lu(A);
  double scale = max_abs(A);
  double pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (scale == 0.0 || pivot < tol.singular_pivot * scale)
    fail(ErrorKind::Singular, "solve_linear: pivot " + std::to_string(pivot) + " below threshold");
  return lu.solve(B);
}

struct EigenDecomposition {
  RVector values;   // ascending
  CMatrix vectors;  // columns are eigenvectors; empty when not requested
};

inline EigenDecomposition hermitian_eig(const CMatrix& A, bool want_vectors = true) {
  if (A.rows() != A.cols()) fail(ErrorKind::Dimension, "hermitian_eig: matrix is not square");
  EigenDecomposition out;
  if (A.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(symmetrize(A),
                                            want_vectors ? Eigen::ComputeEigenvectors
                                                         : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) fail(ErrorKind::Singular, "hermitian_eig: solver did not converge");
  out.values = es.eigenvalues();
  if (want_vectors) out.vectors = es.eigenvectors();
  return out;
}

// half-open index range [begin, end)
struct Range {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const { return end - begin; }
  static Range all(Eigen::Index n) { return {0, n}; }
};

inline CMatrix block_view(const CMatrix& A, Range rows, Range cols) {
  if (rows.begin < 0 || cols.begin < 0 || rows.end > A.rows() || cols.end > A.cols() ||
      rows.begin > rows.end || cols.begin > cols.end)
    fail(ErrorKind::Bounds, "block_view: range outside " + std::to_string(A.rows()) + "x" +
                                std::to_string(A.cols()));
  return A.block(rows.begin, cols.begin, rows.size(), cols.size());
}

// ---- text formats ---------------------------------------------------------

inline std::string format_double(double v) {
  if (v == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_complex(cplx v) {
  if (v.imag() == 0.0) return format_double(v.real());
  std::string re = format_double(v.real());
  std::string im = format_double(std::abs(v.imag()));
  return re + (v.imag() < 0 ? "-" : "+") + im + "i";
}

// Accepts "<re>", "<re>+<im>i", "<re>-<im>i", "<im>i" with decimal or
// scientific notation.
inline cplx parse_complex(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  auto bad = [&] { fail(ErrorKind::Parse, "not a complex literal: '" + s + "'"); };
  if (s.empty()) bad();
  auto to_double = [&](const std::string& t) {
    if (t.empty() || t == "+" || t == "-") return t == "-" ? -1.0 : 1.0;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(t, &used);
    } catch (...) {
      bad();
    }
    if (used != t.size()) bad();
    return v;
  };
  if (s.back() != 'i' && s.back() != 'I') return {to_double(s), 0.0};
  std::string body = s.substr(0, s.size() - 1);
  // split at the last sign that does not belong to an exponent
  std::size_t cut = std::string::npos;
  for (std::size_t p = body.size(); p-- > 1;) {
    if ((body[p] == '+' || body[p] == '-') && body[p - 1] != 'e' && body[p - 1] != 'E') {
      cut = p;
      break;
    }
  }
  if (cut == std::string::npos) return {0.0, to_double(body)};
  return {to_double(body.substr(0, cut)), to_double(body.substr(cut))};
}

inline CMatrix parse_matrix_csv(std::istream& in, const std::string& origin = "<stream>") {
  std::vector<std::vector<cplx>> rows;
  std::string line;
  long declared_r = -1, declared_c = -1;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[line.find_first_not_of(" \t")] == '#') {
      if (rows.empty() && declared_r < 0) {
        std::istringstream hs(line.substr(line.find('#') + 1));
        long r, c;
        if (hs >> r >> c) declared_r = r, declared_c = c;
      }
      continue;
    }
    std::vector<cplx> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(parse_complex(cell));
      } catch (const Error& e) {
        fail(ErrorKind::Parse, origin + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      fail(ErrorKind::Parse, origin + ":" + std::to_string(lineno) + ": row has " +
                                 std::to_string(row.size()) + " cells, expected " +
                                 std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  Eigen::Index c = r ? static_cast<Eigen::Index>(rows.front().size()) : 0;
  if (declared_r >= 0 && (declared_r != r || declared_c != c))
    fail(ErrorKind::Parse, origin + ": header declares " + std::to_string(declared_r) + "x" +
                               std::to_string(declared_c) + " but data is " + std::to_string(r) +
                               "x" + std::to_string(c));
  CMatrix A(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) A(i, j) = rows[i][j];
  return A;
}

inline CMatrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open matrix file '" + path + "'");
  return parse_matrix_csv(in, path);
}

inline void write_matrix_csv(std::ostream& out, const CMatrix& A) {
  out << "# " << A.rows() << ' ' << A.cols() << '\n';
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (j) out << ',';
      out << format_complex(A(i, j));
    }
    out << '\n';
  }
}

inline void write_matrix_csv(const std::string& path, const CMatrix& A) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write matrix file '" + path + "'");
  write_matrix_csv(out, A);
}

}  // namespace fdeq
