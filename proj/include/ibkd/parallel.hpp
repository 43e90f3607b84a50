#pragma once

namespace ibkd::parallel {

/// Worker cap: IBKD_THREADS when set and positive, else machine parallelism.
int configured_threads();
/// Applies configured_threads() to the OpenMP runtime.
void apply_thread_env();
void set_threads(int n);
int max_threads();

}  // namespace ibkd::parallel
