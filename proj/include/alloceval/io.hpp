#pragma once

#include <string>
#include <vector>

#include "alloceval/experiments.hpp"
#include "alloceval/types.hpp"

namespace alloceval {

// Dataset CSV: header + one row per record, policy arm first, each arm sorted
// by agent_id. Columns: agent_id, arm, index, treat_week, covariate_0..,
// reward_t0..; '.' decimal separator, UTF-8.
void write_rct_csv(const RctDataset& data, const std::string& path);
std::string rct_csv_string(const RctDataset& data);

// alpha_override: the CSV does not carry alpha; by default it is recovered as
// (#treated in round 1) / n.
RctDataset read_rct_csv(const std::string& path, double alpha_override = 0.0);

std::vector<TransitionModel> ingest_transitions_csv(const std::string& path);
std::vector<CountTable> ingest_count_tables_csv(const std::string& path);

// One-line JSON object, numbers with 9 significant digits.
std::string report_to_json(const EstimateReport& report);

std::string coverage_csv(const std::vector<std::pair<double, std::map<EstimatorKind, CoverageSummary>>>& rows,
                         const std::string& axis_name);
std::string coverage_series_json(const std::vector<std::pair<double, std::map<EstimatorKind, CoverageSummary>>>& rows,
                                 const std::string& axis_name);

struct RunConfig {
    ExperimentPlan plan;
    std::string dataset_path;
    std::string coverage_csv_path;
    std::string series_json_path;
    int dataset_replicates = 1;
};

// Strict parser: unknown keys anywhere are rejected.
RunConfig parse_config(const std::string& path);

EstimateReport report_from_json_file(const std::string& path);

}  // namespace alloceval
