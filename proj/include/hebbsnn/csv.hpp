#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "hebbsnn/common.hpp"

namespace hebbsnn {

// Append-only CSV writer: comma separators, dot decimals, one header row
// written when the file starts empty. Rows are flushed as they are written so
// an interrupted run keeps everything logged so far.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header) {
    f_ = std::fopen(path.c_str(), "ab");
    if (!f_) fail_numeric("csv: cannot open '" + path + "'");
    std::fseek(f_, 0, SEEK_END);
    if (std::ftell(f_) == 0) {
      std::fprintf(f_, "%s\n", header.c_str());
      std::fflush(f_);
    }
  }
  ~CsvWriter() {
    if (f_) std::fclose(f_);
  }
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::string& line) {
    std::fprintf(f_, "%s\n", line.c_str());
    std::fflush(f_);
  }

  static std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

 private:
  std::FILE* f_ = nullptr;
};

}  // namespace hebbsnn
