#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace wss {

// Stable float formatting for metric CSVs: %.9g, dot decimal, no locale.
inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    void row(const std::vector<std::string>& cells);

private:
    std::ofstream out_;
};

// Minimal reader; the toolkit's CSVs never quote cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

} // namespace wss
