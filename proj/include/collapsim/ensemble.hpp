#pragma once

// Deterministic parallel execution of independent trajectories. Each
// trajectory owns a generator stream derived from (master seed, index) and
// writes only its own result slot, so the summary folded from the slots in
// index order is the same for any worker count. Failures inside a
// trajectory are recorded on its slot, never rethrown.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace collapsim {

struct TrajectoryStats {
    std::uint64_t index = 0;
    std::uint64_t stream = 0;       // generator stream seed actually used
    std::string outcome = "none";   // branch label, "none", or "failed"
    std::uint64_t steps = 0;
    double wall_seconds = 0.0;      // measurement only; never serialized
    bool audit_pass = true;
    double worst_residual = 0.0;
    bool failed = false;
    std::string error;
};

struct OutcomeBin {
    std::string label;
    std::uint64_t count = 0;
    double frequency = 0.0;
    double ci_half_width = 0.0;     // 3 sigma binomial half width
};

struct EnsembleSummary {
    std::uint64_t trajectories = 0;
    std::uint64_t failures = 0;
    std::vector<OutcomeBin> outcomes;      // sorted by label
    double mean_steps = 0.0;
    bool audits_pass = true;
    double total_wall_seconds = 0.0;
    std::vector<TrajectoryStats> table;    // index order
};

using TrajectoryFn = std::function<TrajectoryStats(std::uint64_t index)>;

// Runs fn over indices [0, n) on `workers` threads, claiming indices from
// a shared counter. Progress goes to standard error.
EnsembleSummary run_trajectories(const TrajectoryFn& fn, std::uint64_t n,
                                 int workers);

// The summary fold on its own, for merging partial results. Commutative in
// the sense that the outcome of folding does not depend on the order the
// slots were produced in; the table keeps index order.
EnsembleSummary fold_trajectories(std::vector<TrajectoryStats> slots);

}  // namespace collapsim
