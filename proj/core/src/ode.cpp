#include "mflq/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mflq {

TimeGrid TimeGrid::uniform(double horizon, int num_points) {
    if (horizon <= 0.0 || num_points < 2)
        throw std::invalid_argument("TimeGrid: horizon must be positive and num_points >= 2");
    return TimeGrid{0.0, horizon, num_points};
}

Eigen::Index BlockLayout::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (index_.count(name)) throw std::invalid_argument("BlockLayout: duplicate block " + name);
    Block b{total_, rows, cols};
    index_[name] = blocks_.size();
    blocks_.emplace_back(name, b);
    total_ += b.size();
    return b.offset;
}

const BlockLayout::Block& BlockLayout::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("BlockLayout: unknown block " + name);
    return blocks_[it->second].second;
}

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// 4th-order embedded weights.
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;

// Callback invoked for every accepted step: (t0, y0, f0) -> (t1, y1, f1), t1 < t0.
using StepSampler =
    std::function<void(double t0, const Eigen::VectorXd&, const Eigen::VectorXd&, double t1,
                       const Eigen::VectorXd&, const Eigen::VectorXd&)>;

struct RunResult {
    bool escaped = false;
    double trigger_lo = 0.0;  // escape happened at or below this time
    double trigger_hi = 0.0;  // last time with the norm still below threshold
    double max_norm = 0.0;
};

// Integrates backward from (t_end, terminal) down to t_target.  Stops early with
// escaped=true when the l1 norm crosses the threshold or the step underflows.
RunResult run_backward(const OdeRhs& rhs, const Eigen::VectorXd& terminal, double t_end,
                       double t_target, const IntegratorOptions& opts, double span,
                       const StepSampler& sampler) {
    const Eigen::Index dim = terminal.size();
    const double min_step = opts.min_step_factor * span;

    Eigen::VectorXd y = terminal;
    Eigen::VectorXd f(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), f_new(dim);
    Eigen::VectorXd y_stage(dim), y_new(dim), err_vec(dim);

    RunResult res;
    res.max_norm = y.lpNorm<1>();

    rhs(t_end, y, f);
    if (!f.allFinite())
        throw std::invalid_argument("integrate_backward: rhs non-finite at the terminal point");

    double t = t_end;
    double h = -std::min(span, (t_end - t_target)) * 1e-3;

    while (t > t_target) {
        if (t + h < t_target) h = t_target - t;
        if (-h < min_step) {
            res.escaped = true;
            res.trigger_lo = std::max(t_target, t - std::abs(h));
            res.trigger_hi = t;
            return res;
        }

        y_stage = y + h * a21 * f;
        rhs(t + c2 * h, y_stage, k2);
        y_stage = y + h * (a31 * f + a32 * k2);
        rhs(t + c3 * h, y_stage, k3);
        y_stage = y + h * (a41 * f + a42 * k2 + a43 * k3);
        rhs(t + c4 * h, y_stage, k4);
        y_stage = y + h * (a51 * f + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * h, y_stage, k5);
        y_stage = y + h * (a61 * f + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + h, y_stage, k6);
        y_new = y + h * (b1 * f + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t + h, y_new, f_new);  // FSAL stage, also the 7th stage of the pair

        double err = std::numeric_limits<double>::infinity();
        if (y_new.allFinite() && f_new.allFinite()) {
            err_vec = y + h * (e1 * f + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * f_new);
            err_vec -= y_new;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < dim; ++i) {
                double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
                double q = err_vec[i] / sc;
                acc += q * q;
            }
            err = std::sqrt(acc / static_cast<double>(dim));
        }

        if (err > 1.0) {
            double shrink = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
            h *= shrink;
            continue;
        }

        double t_new = t + h;
        if (opts.post_step) {
            opts.post_step(t_new, y_new);
            rhs(t_new, y_new, f_new);  // refresh FSAL derivative after the state was adjusted
        }

        if (sampler) sampler(t, y, f, t_new, y_new, f_new);

        double norm1 = y_new.lpNorm<1>();
        res.max_norm = std::max(res.max_norm, norm1);
        if (norm1 > opts.blowup_threshold) {
            res.escaped = true;
            res.trigger_lo = t_new;
            res.trigger_hi = t;
            return res;
        }

        y.swap(y_new);
        f.swap(f_new);
        t = t_new;
        h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));
    }
    return res;
}

double bracket_width(const IntegratorOptions& opts, double span) {
    return opts.escape_bracket_width > 0.0 ? opts.escape_bracket_width : 1e-3 * span;
}

bool escapes_down_to(const OdeRhs& rhs, const Eigen::VectorXd& terminal, double t_end,
                     double t_target, const IntegratorOptions& opts, double span) {
    return run_backward(rhs, terminal, t_end, t_target, opts, span, nullptr).escaped;
}

std::pair<double, double> bisect_bracket(const OdeRhs& rhs, const Eigen::VectorXd& terminal,
                                         double t_end, double lo, double hi,
                                         const IntegratorOptions& opts, double span) {
    const double width = bracket_width(opts, span);
    while (hi - lo > width) {
        double mid = 0.5 * (lo + hi);
        if (escapes_down_to(rhs, terminal, t_end, mid, opts, span))
            lo = mid;
        else
            hi = mid;
    }
    return {lo, hi};
}

}  // namespace

IntegrationOutcome integrate_backward(const OdeRhs& rhs, const Eigen::VectorXd& terminal,
                                      const TimeGrid& grid, const IntegratorOptions& opts) {
    if (!grid.valid()) throw std::invalid_argument("integrate_backward: invalid grid");
    if (opts.rtol <= 0.0 || opts.atol <= 0.0)
        throw std::invalid_argument("integrate_backward: tolerances must be positive");
    const double span = grid.t_end - grid.t_start;
    if (terminal.lpNorm<1>() >= opts.blowup_threshold)
        throw std::invalid_argument("integrate_backward: blowup_threshold not above terminal norm");

    IntegrationOutcome out;
    out.solution.assign(grid.num_points, Eigen::VectorXd());
    out.solution.back() = terminal;

    int gi = grid.num_points - 2;  // next grid index to fill, walking backward
    const double teps = 1e-12 * span;

    auto sampler = [&](double t0, const Eigen::VectorXd& y0, const Eigen::VectorXd& f0, double t1,
                       const Eigen::VectorXd& y1, const Eigen::VectorXd& f1) {
        double h = t0 - t1;
        while (gi >= 0 && grid.time(gi) >= t1 - teps) {
            double s = (grid.time(gi) - t1) / h;  // s = 1 at t0, 0 at t1
            double s2 = s * s, s3 = s2 * s;
            out.solution[gi] = (s3 - s2) * h * f0 + (2.0 * s3 - 3.0 * s2 + 1.0) * y1 +
                               (-2.0 * s3 + 3.0 * s2) * y0 + (s3 - 2.0 * s2 + s) * h * f1;
            --gi;
        }
    };

    RunResult res = run_backward(rhs, terminal, grid.t_end, grid.t_start, opts, span, sampler);
    out.max_norm = res.max_norm;

    if (!res.escaped) {
        out.status = IntegrationStatus::Solved;
        // Fill any grid points at (or numerically below) t_start.
        for (; gi >= 0; --gi) out.solution[gi] = out.solution[gi + 1];
        return out;
    }

    out.status = IntegrationStatus::Escaped;
    out.solution.clear();
    double lo = res.trigger_lo, hi = res.trigger_hi;
    const double width = bracket_width(opts, span);
    if (hi - lo > width)
        std::tie(lo, hi) = bisect_bracket(rhs, terminal, grid.t_end, lo, hi, opts, span);
    out.escape_lo = lo;
    out.escape_hi = hi;
    return out;
}

std::pair<double, double> refine_escape_bracket(const OdeRhs& rhs, const Eigen::VectorXd& terminal,
                                                const TimeGrid& grid,
                                                std::pair<double, double> coarse,
                                                const IntegratorOptions& opts) {
    const double span = grid.t_end - grid.t_start;
    auto [lo, hi] = coarse;
    if (!(lo < hi))
        throw std::invalid_argument("refine_escape_bracket: empty interval");
    if (escapes_down_to(rhs, terminal, grid.t_end, hi, opts, span))
        throw std::invalid_argument("refine_escape_bracket: integration down to t_hi escapes");
    if (!escapes_down_to(rhs, terminal, grid.t_end, lo, opts, span))
        throw std::invalid_argument("refine_escape_bracket: interval does not bracket an escape");
    return bisect_bracket(rhs, terminal, grid.t_end, lo, hi, opts, span);
}

}  // namespace mflq
