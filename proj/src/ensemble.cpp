#include "collapsim/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <thread>

namespace collapsim {

namespace {

TrajectoryStats guarded(const TrajectoryFn& fn, std::uint64_t index) {
    auto t0 = std::chrono::steady_clock::now();
    TrajectoryStats s;
    try {
        s = fn(index);
    } catch (const std::exception& e) {
        s = TrajectoryStats{};
        s.outcome = "failed";
        s.failed = true;
        s.audit_pass = false;
        s.error = e.what();
    }
    s.index = index;
    s.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

}  // namespace

EnsembleSummary run_trajectories(const TrajectoryFn& fn, std::uint64_t n,
                                 int workers) {
    if (n < 1) throw std::invalid_argument("ensemble: need at least one trajectory");
    if (workers < 1) throw std::invalid_argument("ensemble: need at least one worker");

    std::vector<TrajectoryStats> slots(n);
    std::atomic<std::uint64_t> next{0};
    std::atomic<std::uint64_t> done{0};
    const std::uint64_t progress_every = std::max<std::uint64_t>(1, n / 10);

    auto worker = [&] {
        for (;;) {
            std::uint64_t i = next.fetch_add(1);
            if (i >= n) break;
            slots[i] = guarded(fn, i);
            std::uint64_t d = done.fetch_add(1) + 1;
            if (d % progress_every == 0 || d == n)
                std::fprintf(stderr, "trajectory %llu/%llu\n",
                             static_cast<unsigned long long>(d),
                             static_cast<unsigned long long>(n));
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(std::size_t(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return fold_trajectories(std::move(slots));
}

EnsembleSummary fold_trajectories(std::vector<TrajectoryStats> slots) {
    EnsembleSummary sum;
    sum.trajectories = slots.size();
    std::map<std::string, std::uint64_t> counts;
    double steps_total = 0.0;
    for (const TrajectoryStats& s : slots) {
        if (s.failed) ++sum.failures;
        counts[s.outcome] += 1;
        steps_total += double(s.steps);
        sum.audits_pass = sum.audits_pass && s.audit_pass;
        sum.total_wall_seconds += s.wall_seconds;
    }
    const double n = double(sum.trajectories);
    sum.mean_steps = sum.trajectories ? steps_total / n : 0.0;
    for (const auto& [label, count] : counts) {
        OutcomeBin bin;
        bin.label = label;
        bin.count = count;
        bin.frequency = double(count) / n;
        bin.ci_half_width = 3.0 * std::sqrt(bin.frequency * (1.0 - bin.frequency) / n);
        sum.outcomes.push_back(std::move(bin));
    }
    sum.table = std::move(slots);
    return sum;
}

}  // namespace collapsim
