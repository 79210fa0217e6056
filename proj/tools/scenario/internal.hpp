#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fields.hpp"
#include "scenario.hpp"

namespace cjl::scenario {

enum class FieldNeed { None, Any, Riemannian };
FieldNeed field_need(const std::string& task);

// Validates the task parameters and fills defaults into p.
void resolve_params(const std::string& task, Fields& p);

// Appends to results and warnings as it goes, so a thrown error leaves a partial record.
// failure is set for results that mean the task did not complete.
void run_task(const Scenario& s, int threads, json& results, std::vector<std::string>& warnings,
              std::string& failure);

// Runs f(i) for i in [0, n) on up to `threads` workers. Rethrows the exception of the
// lowest failing index.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f);

}  // namespace cjl::scenario
