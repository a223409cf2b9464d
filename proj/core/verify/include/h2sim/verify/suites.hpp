#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace h2sim::verify {

struct CheckResult {
    std::string name;
    bool passed = true;
    int cases = 0;
    /// First failure, or a short summary when passing.
    std::string detail;
};

struct SuiteOptions {
    std::uint64_t seed = 20240601;
    /// Random networks per equivalence suite, split evenly between integer and float fixtures.
    int fixtures = 120;
    /// Random tiles for the sparse-backward suites.
    int tiles = 1000;
};

/// train_step against the scalar unrolled-graph oracle.
CheckResult check_oracle_equivalence(const SuiteOptions& opt = {});
/// Engine functional models (LUT forward, sparse backward, LUT weight update) against train_step.
CheckResult check_engine_equivalence(const SuiteOptions& opt = {});
CheckResult check_mask_consistency(const SuiteOptions& opt = {});
CheckResult check_reset_correctness(const SuiteOptions& opt = {});
CheckResult check_determinism(const SuiteOptions& opt = {});
/// LUT forward, LUT weight gradient and FC modes against direct loops for k in {1, 3, 5, 7}.
CheckResult check_lut_equivalence(const SuiteOptions& opt = {});
CheckResult check_compression_roundtrip(const SuiteOptions& opt = {});
/// Generated tasks and executed MACs against a brute-force counter; sparse result against dense.
CheckResult check_sparse_work_accounting(const SuiteOptions& opt = {});
CheckResult check_buffer_balance(const SuiteOptions& opt = {});
CheckResult check_task_monotonicity(const SuiteOptions& opt = {});
/// Cycle-model counters against the functional engine counters.
CheckResult check_replay_agreement(const SuiteOptions& opt = {});
/// Synthetic-sparsity cycles against replay cycles at the measured densities.
CheckResult check_synthetic_vs_replay(const SuiteOptions& opt = {});
CheckResult check_pipeline_property(const SuiteOptions& opt = {});
CheckResult check_lut_storage(const SuiteOptions& opt = {});

struct Suite {
    std::string name;
    std::function<CheckResult(const SuiteOptions&)> run;
};

std::vector<Suite> all_suites();

}  // namespace h2sim::verify
