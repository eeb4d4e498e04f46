#include "cyclicff/training.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace cyclicff {

Metrics run_config(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                   const Dataset& test) {
    if (cfg.baseline == Baseline::bp_chain) {
        BaselineResult r = bp_chain_baseline(cfg, train, val);
        r.metrics.test_err = evaluate(r.model, test);
        return r.metrics;
    }
    TrainResult r = train_loop(cfg, train, val);
    r.metrics.test_err = evaluate(r.net, test);
    return r.metrics;
}

SweepResult sweep(const std::vector<TrainConfig>& grid, const Dataset& train, const Dataset& val,
                  const Dataset& test, std::size_t jobs) {
    if (grid.empty())
        throw ParameterError("sweep: empty grid");
    SweepResult result;
    result.runs.resize(grid.size());

    // Each worker claims the next unstarted config; results land in their
    // grid slot, so scheduling cannot reorder them.
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_lock;
    auto worker = [&] {
        for (std::size_t i = next++; i < grid.size(); i = next++) {
            try {
                result.runs[i] = run_config(grid[i], train, val, test);
            } catch (...) {
                std::lock_guard lock(failure_lock);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, grid.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t)
            pool.emplace_back(worker);
    }
    if (failure)
        std::rethrow_exception(failure);

    for (std::size_t i = 1; i < result.runs.size(); ++i) {
        const double v = best_val_err(result.runs[i]);
        const double best = best_val_err(result.runs[result.best_index]);
        if (v < best || (std::isnan(best) && !std::isnan(v)))
            result.best_index = i;
    }
    return result;
}

} // namespace cyclicff
