#pragma once

#include <functional>

namespace mspflow {

/// Worker count: MSPFLOW_THREADS when set to a positive integer, else the
/// hardware concurrency.
int thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() threads. Each index is
/// handled exactly once; the first exception thrown is rethrown after all
/// workers finish.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace mspflow
