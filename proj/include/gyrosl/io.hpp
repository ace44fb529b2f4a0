#pragma once

// Diagnostics time series and 2D slice files.
//
// Time series: one CSV with a fixed header and one row per output time.
// Slices: {run}/{field}_t{time}_phi{k}_v{m}.csv, a matrix with rows along r
// and columns along theta, preceded by two header lines carrying the r and
// theta coordinates.

#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gyrosl {

inline constexpr const char* kDiagnosticsHeader = "t,u1,uinf,mass,fmax,Ekin,Epot,Etotdev,dmassL,dmassN,boundaryloss";

struct DiagnosticsRecord {
  double t = 0.0;
  double u1 = 0.0;
  double uinf = 0.0;
  double mass = 0.0;
  double fmax = 0.0;
  double E_kin = 0.0;
  double E_pot = 0.0;
  double E_tot_dev = 0.0;
  double dmass_L = 0.0;
  double dmass_N = 0.0;
  double boundary_loss = 0.0;
};

// 17 significant digits; round-trips every finite double.
std::string format_double(double x);

std::string format_record(const DiagnosticsRecord& r);
DiagnosticsRecord parse_record(const std::string& line);

class DiagnosticsWriter {
 public:
  DiagnosticsWriter() = default;
  // Truncates the file and writes the header; with append = true an existing
  // file is kept (its header is checked) and rows are added after it.
  explicit DiagnosticsWriter(const std::filesystem::path& path, bool append = false);
  ~DiagnosticsWriter();
  DiagnosticsWriter(const DiagnosticsWriter&) = delete;
  DiagnosticsWriter& operator=(const DiagnosticsWriter&) = delete;

  void write(const DiagnosticsRecord& r);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
};

std::vector<DiagnosticsRecord> read_diagnostics(const std::filesystem::path& path);
// Keeps the rows with t < t_end (used when resuming a run).
void truncate_diagnostics(const std::filesystem::path& path, double t_end);

struct Slice2D {
  std::vector<double> r;      // row coordinates
  std::vector<double> theta;  // column coordinates
  std::vector<double> values; // r-major
};

std::string slice_file_name(const std::string& field, double time, int phi_index, int v_index);
void write_slice(const std::filesystem::path& path, const Slice2D& slice);
Slice2D read_slice(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace gyrosl
