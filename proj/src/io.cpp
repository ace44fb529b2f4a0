#include "gyrosl/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gyrosl/error.hpp"

namespace gyrosl {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& context) {
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IoError(context + ": not a number: '" + s + "'");
  return x;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_record(const DiagnosticsRecord& r) {
  const double v[] = {r.t, r.u1, r.uinf, r.mass, r.fmax, r.E_kin, r.E_pot, r.E_tot_dev, r.dmass_L, r.dmass_N,
                      r.boundary_loss};
  std::string out;
  for (std::size_t i = 0; i < std::size(v); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

DiagnosticsRecord parse_record(const std::string& line) {
  const auto cells = split_commas(strip_cr(line));
  if (cells.size() != 11) throw IoError("diagnostics row has " + std::to_string(cells.size()) + " columns, expected 11");
  double v[11];
  for (int i = 0; i < 11; ++i) v[i] = parse_number(cells[i], "diagnostics row");
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
}

DiagnosticsWriter::DiagnosticsWriter(const std::filesystem::path& path, bool append) : path_(path) {
  if (append && std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    if (strip_cr(header) != kDiagnosticsHeader) throw IoError(path.string() + ": unexpected diagnostics header");
    file_ = std::fopen(path.c_str(), "a");
    if (!file_) throw IoError(path.string() + ": cannot open for appending: " + std::strerror(errno));
    return;
  }
  file_ = std::fopen(path.c_str(), "w");
  if (!file_) throw IoError(path.string() + ": cannot open for writing: " + std::strerror(errno));
  std::fprintf(file_, "%s\n", kDiagnosticsHeader);
  std::fflush(file_);
}

DiagnosticsWriter::~DiagnosticsWriter() {
  if (file_) std::fclose(file_);
}

void DiagnosticsWriter::write(const DiagnosticsRecord& r) {
  if (!file_) throw IoError("diagnostics writer is not open");
  if (std::fprintf(file_, "%s\n", format_record(r).c_str()) < 0 || std::fflush(file_) != 0)
    throw IoError(path_.string() + ": write failed: " + std::strerror(errno));
}

std::vector<DiagnosticsRecord> read_diagnostics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kDiagnosticsHeader)
    throw IoError(path.string() + ": header does not match '" + std::string(kDiagnosticsHeader) + "'");
  std::vector<DiagnosticsRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (strip_cr(line).empty()) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const IoError& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void truncate_diagnostics(const std::filesystem::path& path, double t_end) {
  const auto rows = read_diagnostics(path);
  std::string text = std::string(kDiagnosticsHeader) + "\n";
  for (const auto& r : rows)
    if (r.t < t_end) text += format_record(r) + "\n";
  write_text_file(path, text);
}

std::string slice_file_name(const std::string& field, double time, int phi_index, int v_index) {
  std::string t;
  if (time == std::floor(time) && std::abs(time) < 1e15) {
    t = std::to_string(static_cast<long long>(time));
  } else {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", time);
    t = buf;
  }
  return field + "_t" + t + "_phi" + std::to_string(phi_index) + "_v" + std::to_string(v_index) + ".csv";
}

void write_slice(const std::filesystem::path& path, const Slice2D& s) {
  if (s.values.size() != s.r.size() * s.theta.size()) throw IoError(path.string() + ": slice shape mismatch");
  std::string text = "r";
  for (double x : s.r) text += "," + format_double(x);
  text += "\ntheta";
  for (double x : s.theta) text += "," + format_double(x);
  text += "\n";
  const std::size_t nt = s.theta.size();
  for (std::size_t i = 0; i < s.r.size(); ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      if (j) text += ',';
      text += format_double(s.values[i * nt + j]);
    }
    text += "\n";
  }
  write_text_file(path, text);
}

Slice2D read_slice(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open");
  Slice2D s;
  std::string line;
  auto axis = [&](const char* name, std::vector<double>& dst) {
    if (!std::getline(in, line)) throw IoError(path.string() + ": missing " + name + " header");
    const auto cells = split_commas(strip_cr(line));
    if (cells.empty() || cells[0] != name) throw IoError(path.string() + ": expected header line starting with " + name);
    for (std::size_t i = 1; i < cells.size(); ++i) dst.push_back(parse_number(cells[i], path.string()));
  };
  axis("r", s.r);
  axis("theta", s.theta);
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != s.theta.size()) throw IoError(path.string() + ": row width does not match the theta axis");
    for (const auto& c : cells) s.values.push_back(parse_number(c, path.string()));
  }
  if (s.values.size() != s.r.size() * s.theta.size()) throw IoError(path.string() + ": row count does not match the r axis");
  return s;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string() + ": write failed");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace gyrosl
