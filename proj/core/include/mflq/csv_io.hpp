#pragma once

#include "mflq/ode.hpp"

#include <string>
#include <vector>

namespace mflq {

using MatrixTrajectoryView = std::vector<Eigen::MatrixXd>;

// Formats with 17 significant digits (round-trip exact for doubles).
std::string csv_number(double v);

struct CsvBlock {
    std::string name;
    const std::vector<Eigen::MatrixXd>* traj;  // one matrix per grid point
};

// One row per grid time: t, <name>[r][c]...  Header row mandatory.
void write_blocks_csv(const std::string& path, const TimeGrid& grid,
                      const std::vector<CsvBlock>& blocks);

// Generic table writer (header + rows of preformatted cells).
void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows);

}  // namespace mflq
