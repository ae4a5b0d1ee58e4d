#pragma once

#include <map>
#include <string>
#include <vector>

// Deterministic text output. Floating-point fields are printed with %.17g
// so values round-trip exactly and files are byte-stable across runs.

namespace emergence {

std::string format_double(double v);  // %.17g

// Column-oriented CSV assembly; the whole file is built in memory and
// written once so partial output never hits disk.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void begin_row();
  void add(double v);
  void add(long v);
  void add(int v);
  void add(const std::string& v);
  void end_row();

  const std::string& str() const { return buf_; }
  void write_file(const std::string& path) const;

 private:
  std::string buf_;
  std::size_t n_cols_ = 0;
  std::size_t col_ = 0;
  bool in_row_ = false;
};

void write_text_file(const std::string& path, const std::string& content);
void ensure_directory(const std::string& path);

// One named pass/fail line of a command run.
struct CheckLine {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string note;
};

// Result of one CLI command: identifying hash, checks, and wall-clock
// timings per phase. Timings are printed to stdout but kept out of the
// files on disk, which must be byte-identical across repeated runs.
struct RunSummary {
  std::string command;
  std::string config_hash;
  std::vector<CheckLine> checks;
  std::vector<std::pair<std::string, double>> timings_sec;

  bool all_passed() const;
  // summary.json payload (no timings).
  std::string to_json() const;
  // Human-readable lines including timings.
  std::string to_text() const;
};

}  // namespace emergence
