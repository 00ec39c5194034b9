#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "lrr/common.hpp"

namespace lrr {

// Shortest round-trip decimal form of a double; CSV output built from this
// is byte-identical across runs of the same binary.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) {
    out_.open(path);
    if (!out_) throw IoError("CsvWriter: cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
      out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
    }
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
    }
  }

  void close() {
    out_.close();
    if (out_.fail()) throw IoError("CsvWriter: write failed on close");
  }

 private:
  std::ofstream out_;
};

}  // namespace lrr
