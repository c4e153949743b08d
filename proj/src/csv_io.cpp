#include "wendy/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace wendy {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r' && c != ' ' && c != '\t') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, int line) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": '" + s + "' is not a number");
  }
  return v;
}

}  // namespace

std::string dataset_to_csv(const Dataset& ds) {
  std::ostringstream os;
  char buf[32];
  const auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, res.ptr - buf);
  };
  os << 't';
  for (int i = 0; i < ds.dim(); ++i) os << ",u" << i + 1;
  os << '\n';
  for (int m = 0; m < ds.grid.num_samples(); ++m) {
    put(ds.grid.t(m));
    for (int i = 0; i < ds.dim(); ++i) {
      os << ',';
      put(ds.U(m, i));
    }
    os << '\n';
  }
  return os.str();
}

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split(line);
    break;
  }
  if (header.empty()) throw Error(ErrorCode::ParseError, "empty CSV");
  if (header[0] != "t") throw Error(ErrorCode::ParseError, "first column must be 't'");
  const int d = static_cast<int>(header.size()) - 1;
  if (d < 1) throw Error(ErrorCode::ParseError, "CSV has no state columns");
  for (int i = 0; i < d; ++i) {
    if (header[i + 1] != "u" + std::to_string(i + 1)) {
      throw Error(ErrorCode::ParseError, "expected column 'u" + std::to_string(i + 1) + "', got '" + header[i + 1] + "'");
    }
  }
  std::vector<double> t;
  std::vector<double> vals;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split(line);
    if (static_cast<int>(f.size()) != d + 1) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected " + std::to_string(d + 1) + " fields");
    }
    t.push_back(parse_double(f[0], lineno));
    for (int i = 0; i < d; ++i) vals.push_back(parse_double(f[i + 1], lineno));
  }
  const int n = static_cast<int>(t.size());
  if (n < 3) throw Error(ErrorCode::ParseError, "need at least 3 samples");
  const int M = n - 1;
  const double dt = (t[M] - t[0]) / M;
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::NonUniformGrid, "time column must be increasing");
  for (int m = 0; m < n; ++m) {
    if (std::abs(t[m] - (t[0] + m * dt)) > 1e-9 * dt) {
      throw Error(ErrorCode::NonUniformGrid, "time column is not uniform at row " + std::to_string(m + 1));
    }
  }
  Matrix U(n, d);
  for (int m = 0; m < n; ++m) {
    for (int i = 0; i < d; ++i) U(m, i) = vals[static_cast<std::size_t>(m) * d + i];
  }
  return Dataset(TimeGrid(t[0], dt, n), std::move(U));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IOError, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IOError, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IOError, "failed writing '" + path + "'");
}

void write_dataset(const std::string& path, const Dataset& ds) { write_text_file(path, dataset_to_csv(ds)); }

Dataset read_dataset(const std::string& path) { return dataset_from_csv(read_text_file(path)); }

std::string truth_path(const std::string& path) {
  const std::string ext = ".csv";
  if (path.size() >= ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0) {
    return path.substr(0, path.size() - ext.size()) + ".truth.csv";
  }
  return path + ".truth.csv";
}

}  // namespace wendy
