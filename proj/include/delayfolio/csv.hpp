#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "delayfolio/types.hpp"

namespace delayfolio {

// RFC-4180-style writer; numbers at 17 significant digits with '.' decimals.
class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("csv: cannot open " + path);
    }

    void header(const std::vector<std::string>& cols) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (i) out_ << ',';
            out_ << cols[i];
        }
        out_ << "\r\n";
    }

    void field(double v) {
        if (pos_++) out_ << ',';
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out_ << buf;
    }
    void field(long v) {
        if (pos_++) out_ << ',';
        out_ << v;
    }
    void field(const std::string& s) {
        if (pos_++) out_ << ',';
        out_ << s;
    }
    void end_row() {
        out_ << "\r\n";
        pos_ = 0;
    }

  private:
    std::ofstream out_;
    int pos_ = 0;
};

}  // namespace delayfolio
