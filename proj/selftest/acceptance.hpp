#pragma once

#include <functional>
#include <string>
#include <vector>

namespace pyrflow::acceptance {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;  // measured values behind the verdict
    double seconds = 0.0;
};

/// Runs criteria 1..8 in order. `on_result` sees each result as it lands.
std::vector<CriterionResult> run_all(const std::function<void(const CriterionResult&)>& on_result = {});

/// Individual criteria.
CriterionResult correlation_equivalence();
CriterionResult architecture_contract();
CriterionResult weight_sharing();
CriterionResult convex_upsampling();
CriterionResult synthetic_end_to_end();
CriterionResult metrics_battery();
CriterionResult formats();
CriterionResult data_pipeline();

/// "[PASS] 3 weight sharing (0.12 s): detail".
std::string format_line(const CriterionResult& r);

}  // namespace pyrflow::acceptance
