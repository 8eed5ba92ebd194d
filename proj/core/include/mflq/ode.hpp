#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mflq {

// Uniform grid on [t_start, t_end], endpoints included.
struct TimeGrid {
    double t_start = 0.0;
    double t_end = 1.0;
    int num_points = 2;

    static TimeGrid uniform(double horizon, int num_points);

    double dt() const { return (t_end - t_start) / (num_points - 1); }
    double time(int i) const { return t_start + i * dt(); }
    bool valid() const { return num_points >= 2 && t_end > t_start; }
};

// Named-block descriptor over a flat vector.  Blocks are matrices stored
// column-major in insertion order.
class BlockLayout {
public:
    struct Block {
        Eigen::Index offset;
        Eigen::Index rows;
        Eigen::Index cols;
        Eigen::Index size() const { return rows * cols; }
    };

    Eigen::Index add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    const Block& at(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    Eigen::Index total_size() const { return total_; }
    const std::vector<std::pair<std::string, Block>>& blocks() const { return blocks_; }

private:
    std::vector<std::pair<std::string, Block>> blocks_;
    std::map<std::string, std::size_t> index_;
    Eigen::Index total_ = 0;
};

// Flat vector with named matrix views.
struct FlatState {
    Eigen::VectorXd values;
    std::shared_ptr<const BlockLayout> layout;

    FlatState() = default;
    explicit FlatState(std::shared_ptr<const BlockLayout> l)
        : values(Eigen::VectorXd::Zero(l->total_size())), layout(std::move(l)) {}

    Eigen::Map<Eigen::MatrixXd> block(const std::string& name) {
        const auto& b = layout->at(name);
        return {values.data() + b.offset, b.rows, b.cols};
    }
    Eigen::Map<const Eigen::MatrixXd> block(const std::string& name) const {
        const auto& b = layout->at(name);
        return {values.data() + b.offset, b.rows, b.cols};
    }
};

enum class IntegrationStatus { Solved, Escaped };

struct IntegrationOutcome {
    IntegrationStatus status = IntegrationStatus::Solved;
    // One state per grid point (index i corresponds to grid.time(i)); empty when Escaped.
    std::vector<Eigen::VectorXd> solution;
    double escape_lo = 0.0;
    double escape_hi = 0.0;
    double max_norm = 0.0;

    bool solved() const { return status == IntegrationStatus::Solved; }
};

using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;

struct IntegratorOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double blowup_threshold = 1e8;
    // Escape brackets are narrowed to this width; <= 0 means 1e-3 * (t_end - t_start).
    double escape_bracket_width = -1.0;
    // Steps below min_step_factor * (t_end - t_start) count as escape.
    double min_step_factor = 1e-12;
    // Applied to the state after every accepted step (e.g. symmetrization).
    std::function<void(double, Eigen::VectorXd&)> post_step;
};

// Integrates dy/dt = rhs(t, y) backward from (t_end, terminal) down to t_start
// with an embedded Dormand-Prince 5(4) pair, sampling the solution on the grid
// by cubic Hermite interpolation.  Declares escape when the l1 norm of the
// state crosses blowup_threshold or the step size underflows, and narrows the
// escape bracket by bisection.
// Throws std::invalid_argument if rhs is non-finite at the terminal point.
IntegrationOutcome integrate_backward(const OdeRhs& rhs, const Eigen::VectorXd& terminal,
                                      const TimeGrid& grid, const IntegratorOptions& opts = {});

// Narrows a coarse escape bracket (t_lo, t_hi): integration from t_end down to
// t_hi must succeed while integration down to t_lo escapes.
// Throws std::invalid_argument if the coarse interval does not bracket an escape.
std::pair<double, double> refine_escape_bracket(const OdeRhs& rhs, const Eigen::VectorXd& terminal,
                                                const TimeGrid& grid,
                                                std::pair<double, double> coarse,
                                                const IntegratorOptions& opts = {});

}  // namespace mflq
