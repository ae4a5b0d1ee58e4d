#include "emergence/runio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "emergence/errors.hpp"

namespace emergence {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : n_cols_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) buf_ += ',';
    buf_ += header[i];
  }
  buf_ += '\n';
}

void CsvWriter::begin_row() {
  if (in_row_) throw ConfigError("CsvWriter: begin_row inside an open row");
  in_row_ = true;
  col_ = 0;
}

void CsvWriter::add(double v) { add(format_double(v)); }
void CsvWriter::add(long v) { add(std::to_string(v)); }
void CsvWriter::add(int v) { add(std::to_string(v)); }

void CsvWriter::add(const std::string& v) {
  if (!in_row_ || col_ >= n_cols_) throw ConfigError("CsvWriter: column overflow");
  if (col_) buf_ += ',';
  buf_ += v;
  ++col_;
}

void CsvWriter::end_row() {
  if (!in_row_ || col_ != n_cols_)
    throw ConfigError("CsvWriter: row ended with wrong column count");
  buf_ += '\n';
  in_row_ = false;
}

void CsvWriter::write_file(const std::string& path) const {
  write_text_file(path, buf_);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw ConfigError("cannot create output directory '" + path + "'");
}

bool RunSummary::all_passed() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string RunSummary::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["all_passed"] = all_passed();
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["pass"] = c.pass;
    cj["measured"] = c.measured;
    cj["tolerance"] = c.tolerance;
    if (!c.note.empty()) cj["note"] = c.note;
    arr.push_back(cj);
  }
  j["checks"] = arr;
  return j.dump(2) + "\n";
}

std::string RunSummary::to_text() const {
  std::string out;
  out += "== " + command + " (config " + config_hash + ") ==\n";
  for (const auto& c : checks) {
    out += c.pass ? "[PASS] " : "[FAIL] ";
    out += c.name + ": measured " + format_double(c.measured) + " (tolerance " +
           format_double(c.tolerance) + ")";
    if (!c.note.empty()) out += "  -- " + c.note;
    out += "\n";
  }
  for (const auto& [phase, sec] : timings_sec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", sec);
    out += "time " + phase + ": " + buf + " s\n";
  }
  return out;
}

}  // namespace emergence
