#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "erp/errors.hpp"

namespace erp {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Write-temp-then-rename so readers never observe a half-written file.
inline void write_text_file_atomic(const std::filesystem::path& path,
                                   const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ReportWriteError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ReportWriteError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ReportWriteError("cannot rename " + tmp.string() + ": " + ec.message());
}

/// One sequence per line; blank lines are skipped. Errors if nothing remains.
inline std::vector<std::string> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw CorpusEmpty();
  return lines;
}

}  // namespace erp
