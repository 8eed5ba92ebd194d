#include "mflq/csv_io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mflq {

std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_blocks_csv(const std::string& path, const TimeGrid& grid,
                      const std::vector<CsvBlock>& blocks) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t";
    for (const auto& b : blocks) {
        const auto& m0 = b.traj->front();
        for (Eigen::Index r = 0; r < m0.rows(); ++r)
            for (Eigen::Index c = 0; c < m0.cols(); ++c)
                out << "," << b.name << "[" << r << "][" << c << "]";
    }
    out << "\n";
    for (int i = 0; i < grid.num_points; ++i) {
        out << csv_number(grid.time(i));
        for (const auto& b : blocks) {
            const auto& m = (*b.traj)[i];
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c) out << "," << csv_number(m(r, c));
        }
        out << "\n";
    }
}

void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

}  // namespace mflq
