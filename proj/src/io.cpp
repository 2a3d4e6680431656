#include "alloceval/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace alloceval {

namespace {

using nlohmann::json;

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string fmt9(double v) { return fmt(v, "%.9g"); }

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

double parse_double(const std::string& s, int line_no) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw config_error("line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
    }
}

int parse_int(const std::string& s, int line_no) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw config_error("line " + std::to_string(line_no) + ": cannot parse integer '" + s + "'");
    }
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw config_error("failed writing '" + path + "'");
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& known,
                         const std::string& section) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw config_error("unknown key '" + it.key() + "' in " + section);
}

}  // namespace

std::string rct_csv_string(const RctDataset& data) {
    const int dim =
        data.policy_arm.empty() ? 0 : static_cast<int>(data.policy_arm.front().covariates.size());
    std::string out = "agent_id,arm,index,treat_week";
    for (int j = 0; j < dim; ++j) out += ",covariate_" + std::to_string(j);
    for (int t = 0; t < data.horizon; ++t) out += ",reward_t" + std::to_string(t);
    out += "\n";

    auto emit_arm = [&](const std::vector<RctRecord>& arm, const char* name) {
        std::vector<const RctRecord*> sorted;
        sorted.reserve(arm.size());
        for (const auto& rec : arm) sorted.push_back(&rec);
        std::sort(sorted.begin(), sorted.end(),
                  [](const RctRecord* a, const RctRecord* b) { return a->agent_id < b->agent_id; });
        for (const RctRecord* rec : sorted) {
            out += std::to_string(rec->agent_id);
            out += ",";
            out += name;
            out += "," + fmt(rec->index) + "," + std::to_string(rec->treat_week);
            for (double c : rec->covariates) out += "," + fmt(c);
            for (double r : rec->reward_path) out += "," + fmt(r);
            out += "\n";
        }
    };
    emit_arm(data.policy_arm, "policy");
    emit_arm(data.control_arm, "control");
    return out;
}

void write_rct_csv(const RctDataset& data, const std::string& path) {
    write_file(path, rct_csv_string(data));
}

RctDataset read_rct_csv(const std::string& path, double alpha_override) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw config_error("line 1: empty dataset file");
    const auto header = split(lines[0], ',');
    if (header.size() < 5 || header[0] != "agent_id" || header[1] != "arm" ||
        header[2] != "index" || header[3] != "treat_week")
        throw config_error("line 1: malformed dataset header");
    int dim = 0, horizon = 0;
    std::size_t col = 4;
    while (col < header.size() && header[col] == "covariate_" + std::to_string(dim)) {
        ++dim;
        ++col;
    }
    while (col < header.size() && header[col] == "reward_t" + std::to_string(horizon)) {
        ++horizon;
        ++col;
    }
    if (col != header.size() || horizon == 0)
        throw config_error("line 1: unexpected dataset column '" +
                           (col < header.size() ? header[col] : "") + "'");

    RctDataset data;
    data.horizon = horizon;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const int line_no = static_cast<int>(i) + 1;
        const auto fields = split(lines[i], ',');
        if (fields.size() != header.size())
            throw config_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(fields.size()));
        RctRecord rec;
        rec.agent_id = parse_int(fields[0], line_no);
        if (fields[1] == "policy")
            rec.arm = Arm::policy;
        else if (fields[1] == "control")
            rec.arm = Arm::control;
        else
            throw config_error("line " + std::to_string(line_no) + ": bad arm '" + fields[1] + "'");
        rec.index = parse_double(fields[2], line_no);
        rec.treat_week = parse_int(fields[3], line_no);
        for (int j = 0; j < dim; ++j) rec.covariates.push_back(parse_double(fields[4 + j], line_no));
        for (int t = 0; t < horizon; ++t)
            rec.reward_path.push_back(parse_double(fields[4 + dim + t], line_no));
        (rec.arm == Arm::policy ? data.policy_arm : data.control_arm).push_back(std::move(rec));
    }

    int rounds = 1, treated_round1 = 0;
    for (const auto& rec : data.policy_arm) {
        rounds = std::max(rounds, rec.treat_week);
        if (rec.treat_week == 1) ++treated_round1;
    }
    data.rounds = rounds;
    data.alpha = alpha_override > 0.0
                     ? alpha_override
                     : static_cast<double>(treated_round1) / std::max<std::size_t>(1, data.policy_arm.size());
    bool binary = true;
    for (const auto& rec : data.policy_arm)
        for (double v : rec.reward_path)
            if (v != 0.0 && v != 1.0) binary = false;
    for (const auto& rec : data.control_arm)
        for (double v : rec.reward_path)
            if (v != 0.0 && v != 1.0) binary = false;
    data.validate(binary);
    return data;
}

std::vector<TransitionModel> ingest_transitions_csv(const std::string& path) {
    const auto lines = read_lines(path);
    const std::vector<std::string> expected = {"t0_00", "t0_01", "t0_10", "t0_11",
                                               "t1_00", "t1_01", "t1_10", "t1_11"};
    if (lines.empty() || split(lines[0], ',') != expected)
        throw config_error("line 1: expected header t0_00,...,t1_11");
    std::vector<TransitionModel> pool;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const int line_no = static_cast<int>(i) + 1;
        const auto fields = split(lines[i], ',');
        if (fields.size() != 8)
            throw config_error("line " + std::to_string(line_no) + ": expected 8 fields");
        TransitionModel t;
        int f = 0;
        for (int a = 0; a < 2; ++a)
            for (int s = 0; s < 2; ++s)
                for (int to = 0; to < 2; ++to) t.probs[a][s][to] = parse_double(fields[f++], line_no);
        for (int a = 0; a < 2; ++a)
            for (int s = 0; s < 2; ++s) {
                const double row = t.probs[a][s][0] + t.probs[a][s][1];
                if (std::abs(row - 1.0) > 1e-9)
                    throw invariant_error("row " + std::to_string(line_no) +
                                          ": transition row sums to " + fmt(row));
            }
        t.validate();
        pool.push_back(t);
    }
    if (pool.empty()) throw config_error("transition pool file has no data rows");
    return pool;
}

std::vector<CountTable> ingest_count_tables_csv(const std::string& path) {
    const auto lines = read_lines(path);
    std::vector<std::string> expected;
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a)
            for (int to = 0; to < 2; ++to)
                expected.push_back("n_" + std::to_string(s) + std::to_string(a) + std::to_string(to));
    if (lines.empty() || split(lines[0], ',') != expected)
        throw config_error("line 1: expected header n_000,...,n_111");
    std::vector<CountTable> pool;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const int line_no = static_cast<int>(i) + 1;
        const auto fields = split(lines[i], ',');
        if (fields.size() != 8)
            throw config_error("line " + std::to_string(line_no) + ": expected 8 fields");
        CountTable table;
        int f = 0;
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 2; ++a)
                for (int to = 0; to < 2; ++to) {
                    const double v = parse_double(fields[f++], line_no);
                    if (v < 0.0)
                        throw invariant_error("row " + std::to_string(line_no) + ": negative count");
                    table.counts[s][a][to] = v;
                }
        pool.push_back(table);
    }
    if (pool.empty()) throw config_error("count table file has no data rows");
    return pool;
}

std::string report_to_json(const EstimateReport& report) {
    std::string out = "{";
    out += "\"estimator\":\"" + to_string(report.estimator) + "\"";
    out += ",\"point\":" + fmt9(report.point);
    if (report.variance) out += ",\"variance\":" + fmt9(*report.variance);
    if (report.ci_low) out += ",\"ci_low\":" + fmt9(*report.ci_low);
    if (report.ci_high) out += ",\"ci_high\":" + fmt9(*report.ci_high);
    out += ",\"level\":" + fmt9(report.level);
    if (report.p_value) out += ",\"p_value\":" + fmt9(*report.p_value);
    out += ",\"n\":" + std::to_string(report.n);
    out += ",\"alpha\":" + fmt9(report.alpha);
    if (report.hybrid_weight) out += ",\"hybrid_weight\":" + fmt9(*report.hybrid_weight);
    if (report.variance_clamped) out += ",\"variance_clamped\":true";
    out += "}";
    return out;
}

std::string coverage_csv(
    const std::vector<std::pair<double, std::map<EstimatorKind, CoverageSummary>>>& rows,
    const std::string& axis_name) {
    std::string out;
    if (!axis_name.empty()) out += axis_name + ",";
    out += "estimator,below,covered,above,mean_half_width,estimand,replicates\n";
    for (const auto& [value, summaries] : rows)
        for (const auto& [kind, s] : summaries) {
            if (!axis_name.empty()) out += fmt9(value) + ",";
            out += to_string(kind) + "," + fmt9(s.below) + "," + fmt9(s.covered) + "," +
                   fmt9(s.above) + "," + fmt9(s.mean_half_width) + "," + fmt9(s.estimand) + "," +
                   std::to_string(s.replicates) + "\n";
        }
    return out;
}

std::string coverage_series_json(
    const std::vector<std::pair<double, std::map<EstimatorKind, CoverageSummary>>>& rows,
    const std::string& axis_name) {
    std::string out = "{\"axis\":\"" + (axis_name.empty() ? std::string("none") : axis_name) +
                      "\",\"series\":[";
    bool first = true;
    for (const auto& [value, summaries] : rows)
        for (const auto& [kind, s] : summaries) {
            if (!first) out += ",";
            first = false;
            out += "{\"value\":" + fmt9(value) + ",\"estimator\":\"" + to_string(kind) +
                   "\",\"below\":" + fmt9(s.below) + ",\"covered\":" + fmt9(s.covered) +
                   ",\"above\":" + fmt9(s.above) + ",\"mean_half_width\":" + fmt9(s.mean_half_width) +
                   ",\"estimand\":" + fmt9(s.estimand) +
                   ",\"replicates\":" + std::to_string(s.replicates) + "}";
        }
    out += "]}";
    return out;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config '" + path + "'");
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config parse error: ") + e.what());
    }
    reject_unknown_keys(root, {"simulator", "policy", "experiment", "output", "pools"}, "config");

    RunConfig cfg;
    ExperimentPlan& plan = cfg.plan;

    if (root.contains("simulator")) {
        const json& s = root["simulator"];
        reject_unknown_keys(s,
                            {"domain", "n", "horizon", "effect_cap", "covariate_dim", "seed",
                             "corner_sigma", "prior_strength", "initial_state", "boost_center"},
                            "simulator");
        if (s.contains("domain")) {
            const std::string d = s["domain"];
            if (d == "synthetic")
                plan.simulator.domain_tag = DomainTag::synthetic;
            else if (d == "tb")
                plan.simulator.domain_tag = DomainTag::tb;
            else if (d == "mmitra")
                plan.simulator.domain_tag = DomainTag::mmitra;
            else if (d == "corner_case")
                plan.simulator.domain_tag = DomainTag::corner_case;
            else
                throw config_error("unknown simulator domain '" + d + "'");
        }
        if (s.contains("n")) plan.simulator.n = s["n"];
        if (s.contains("horizon")) {
            plan.simulator.horizon = s["horizon"];
            plan.horizon = s["horizon"];
        }
        if (s.contains("effect_cap")) plan.simulator.effect_cap = s["effect_cap"];
        if (s.contains("covariate_dim")) plan.simulator.covariate_dim = s["covariate_dim"];
        if (s.contains("seed")) plan.simulator.seed = s["seed"];
        if (s.contains("corner_sigma")) plan.simulator.corner_sigma = s["corner_sigma"];
        if (s.contains("prior_strength")) plan.simulator.prior_strength = s["prior_strength"];
        if (s.contains("initial_state")) {
            const std::string v = s["initial_state"];
            if (v == "stationary")
                plan.simulator.initial_state = InitialState::stationary;
            else if (v == "fixed_good")
                plan.simulator.initial_state = InitialState::fixed_good;
            else if (v == "fixed_bad")
                plan.simulator.initial_state = InitialState::fixed_bad;
            else
                throw config_error("unknown initial_state '" + v + "'");
        }
        if (s.contains("boost_center")) {
            const std::string v = s["boost_center"];
            if (v == "quantile")
                plan.simulator.boost_center = BoostCenter::quantile;
            else if (v == "alpha")
                plan.simulator.boost_center = BoostCenter::alpha_literal;
            else
                throw config_error("unknown boost_center '" + v + "'");
        }
    }

    if (root.contains("policy")) {
        const json& p = root["policy"];
        reject_unknown_keys(p, {"index", "alpha", "rounds", "custom_column"}, "policy");
        if (p.contains("index")) {
            const std::string v = p["index"];
            if (v == "whittle")
                plan.policy.index_kind = IndexKind::whittle;
            else if (v == "random")
                plan.policy.index_kind = IndexKind::random;
            else if (v == "custom_column")
                plan.policy.index_kind = IndexKind::custom_column;
            else
                throw config_error("unknown policy index '" + v + "'");
        }
        if (p.contains("alpha")) plan.policy.alpha = p["alpha"];
        if (p.contains("rounds")) plan.policy.rounds = p["rounds"];
        if (p.contains("custom_column")) plan.policy.custom_column = p["custom_column"];
    }

    if (root.contains("experiment")) {
        const json& e = root["experiment"];
        reject_unknown_keys(e,
                            {"replicates", "estimators", "level", "estimand_reps", "truncate_at",
                             "sweep", "workers"},
                            "experiment");
        if (e.contains("replicates")) plan.replicates = e["replicates"];
        if (e.contains("level")) plan.level = e["level"];
        if (e.contains("estimand_reps")) plan.estimand_reps = e["estimand_reps"];
        if (e.contains("workers")) plan.workers = e["workers"];
        if (e.contains("truncate_at") && !e["truncate_at"].is_null())
            plan.truncate_at = e["truncate_at"].get<int>();
        if (e.contains("estimators")) {
            plan.estimators.clear();
            for (const auto& name : e["estimators"])
                plan.estimators.push_back(estimator_kind_from_string(name.get<std::string>()));
        }
        if (e.contains("sweep") && !e["sweep"].is_null()) {
            const json& sw = e["sweep"];
            reject_unknown_keys(sw, {"axis", "grid"}, "sweep");
            SweepAxis axis;
            axis.name = sw.at("axis").get<std::string>();
            for (const auto& v : sw.at("grid")) axis.grid.push_back(v.get<double>());
            plan.sweep_axis = axis;
        }
    }

    if (root.contains("output")) {
        const json& o = root["output"];
        reject_unknown_keys(o, {"dataset_path", "coverage_csv", "series_json", "dataset_replicates"},
                            "output");
        if (o.contains("dataset_path")) cfg.dataset_path = o["dataset_path"];
        if (o.contains("coverage_csv")) cfg.coverage_csv_path = o["coverage_csv"];
        if (o.contains("series_json")) cfg.series_json_path = o["series_json"];
        if (o.contains("dataset_replicates")) cfg.dataset_replicates = o["dataset_replicates"];
    }

    if (root.contains("pools")) {
        const json& p = root["pools"];
        reject_unknown_keys(p, {"transitions_csv", "count_tables_csv"}, "pools");
        if (p.contains("transitions_csv"))
            plan.passive_pool = ingest_transitions_csv(p["transitions_csv"].get<std::string>());
        if (p.contains("count_tables_csv"))
            plan.trajectory_pool = ingest_count_tables_csv(p["count_tables_csv"].get<std::string>());
    }

    return cfg;
}

EstimateReport report_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open report '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("report parse error: ") + e.what());
    }
    EstimateReport report;
    report.estimator = estimator_kind_from_string(j.at("estimator").get<std::string>());
    report.point = j.at("point");
    if (j.contains("variance")) report.variance = j["variance"].get<double>();
    if (j.contains("ci_low")) report.ci_low = j["ci_low"].get<double>();
    if (j.contains("ci_high")) report.ci_high = j["ci_high"].get<double>();
    if (j.contains("level")) report.level = j["level"];
    if (j.contains("p_value")) report.p_value = j["p_value"].get<double>();
    report.n = j.at("n");
    if (j.contains("alpha")) report.alpha = j["alpha"];
    if (j.contains("hybrid_weight")) report.hybrid_weight = j["hybrid_weight"].get<double>();
    return report;
}

}  // namespace alloceval
