#pragma once

// File ingestion, pipeline orchestration, and rendering: CSV in, ANOVA
// tables, treatment effects, and efficiency summaries out (text or JSON).

#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sweepaov/anova.hpp"
#include "sweepaov/block_design.hpp"
#include "sweepaov/errors.hpp"
#include "sweepaov/matrix.hpp"
#include "sweepaov/model.hpp"
#include "sweepaov/spectral.hpp"
#include "sweepaov/sweep.hpp"

namespace sweepaov {

enum class OutputFormat { Text, Json };

struct AnalysisConfig {
    std::string design_path;
    std::string response_column = "y";
    std::string block_column = "block";
    std::string treatment_column = "treatment";
    std::vector<std::string> extra_factor_columns;
    Tolerance tol;
    OutputFormat output_format = OutputFormat::Text;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return j;
        throw ValidationError("missing column '" + name + "' in input file");
    }

    bool has_column(const std::string& name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file '" + path + "'");
    CsvTable table;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (table.header.empty()) {
            table.header = std::move(fields);
        } else {
            if (fields.size() != table.header.size())
                throw ValidationError("row " + std::to_string(table.rows.size() + 2) + " has " +
                                      std::to_string(fields.size()) + " fields, header has " +
                                      std::to_string(table.header.size()));
            table.rows.push_back(std::move(fields));
        }
    }
    if (table.header.empty() || table.rows.empty())
        throw ValidationError("empty file '" + path + "'");
    return table;
}

inline Factor factor_from_column(const CsvTable& csv, const std::string& name) {
    const std::size_t col = csv.column(name);
    std::vector<std::string> labels;
    std::vector<int> levels;
    levels.reserve(csv.rows.size());
    for (const auto& row : csv.rows) {
        const std::string& value = row[col];
        int idx = 0;
        for (std::size_t j = 0; j < labels.size(); ++j)
            if (labels[j] == value) {
                idx = static_cast<int>(j) + 1;
                break;
            }
        if (idx == 0) {
            labels.push_back(value);
            idx = static_cast<int>(labels.size());
        }
        levels.push_back(idx);
    }
    const int num_levels = static_cast<int>(labels.size());
    return Factor(name, std::move(levels), num_levels, std::move(labels));
}

inline double parse_response(const std::string& text, std::size_t row) {
    std::size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &consumed);
    } catch (const std::exception&) {
        throw ValidationError("non-numeric response '" + text + "' at data row " +
                              std::to_string(row + 1));
    }
    if (consumed != text.size() || !std::isfinite(value))
        throw ValidationError("non-numeric response '" + text + "' at data row " +
                              std::to_string(row + 1));
    return value;
}

inline std::string format_number(double x) {
    std::ostringstream out;
    out << std::setprecision(6) << x;
    return out.str();
}

inline std::string format_p(double p) {
    if (p < 1e-12) return "<1e-12";
    return format_number(p);
}

}  // namespace detail

struct IngestResult {
    UnitTable table;
    std::optional<BlockDesign> design;
};

// Read a CSV design file: one row per experimental unit, header row naming
// the columns. Factor levels are mapped to indices in first-appearance
// order. The block design is validated (equal block sizes, equal
// replication) whenever both the block and treatment columns are present.
inline IngestResult ingest(const std::string& path, const AnalysisConfig& config,
                           bool require_response = true) {
    const detail::CsvTable csv = detail::read_csv(path);

    IngestResult out;
    out.table.n = csv.rows.size();

    const Factor blocks = detail::factor_from_column(csv, config.block_column);
    const Factor treatments = detail::factor_from_column(csv, config.treatment_column);
    out.table.factors.push_back(blocks);
    out.table.factors.push_back(treatments);
    for (const auto& name : config.extra_factor_columns)
        out.table.factors.push_back(detail::factor_from_column(csv, name));

    if (require_response || csv.has_column(config.response_column)) {
        const std::size_t ycol = csv.column(config.response_column);
        out.table.response.reserve(out.table.n);
        for (std::size_t i = 0; i < csv.rows.size(); ++i)
            out.table.response.push_back(detail::parse_response(csv.rows[i][ycol], i));
    }

    std::vector<std::pair<std::size_t, std::size_t>> assignment(out.table.n);
    for (std::size_t u = 0; u < out.table.n; ++u)
        assignment[u] = {static_cast<std::size_t>(blocks.levels[u] - 1),
                         static_cast<std::size_t>(treatments.levels[u] - 1)};
    out.design = BlockDesign::create(static_cast<std::size_t>(treatments.num_levels),
                                     static_cast<std::size_t>(blocks.num_levels),
                                     std::move(assignment), blocks.labels, treatments.labels);
    return out;
}

struct AnalysisReport {
    AnovaTable anova;
    std::vector<std::pair<std::string, double>> effects;  // treatment label -> centered effect
    std::optional<EfficiencyReport> efficiency;
    std::optional<double> three_stage_max_dev;
    BlockDesign design;
    std::vector<std::string> diagnostics;
    std::size_t n = 0;
};

// Full analysis pipeline: sweep the mean, sweep blocks then treatments (then
// any extra factors, with treatments last so they are adjusted for all
// nuisance structure), assemble the ANOVA table, and summarize design
// efficiency. For a BIB design the three-stage sweep of the residual
// operator is cross-checked against the two-stage form and the deviation
// reported.
inline AnalysisReport analyze(const AnalysisConfig& config) {
    const IngestResult in = ingest(config.design_path, config, true);
    const UnitTable& table = in.table;
    const BlockDesign& design = *in.design;
    const std::size_t n = table.n;

    const Vector ystar = sweep_mean(table.response);

    std::vector<ModelTerm> terms;
    terms.push_back(indicator_matrix(table.factors[0], n));  // blocks
    for (std::size_t i = 2; i < table.factors.size(); ++i)
        terms.push_back(indicator_matrix(table.factors[i], n));
    terms.push_back(indicator_matrix(table.factors[1], n));  // treatments, adjusted last
    const std::size_t treatment_term = terms.size() - 1;

    const SweepOutcome outcome = sequential_sweep(terms, ystar, config.tol);

    const Matrix inc = incidence(design);
    const bool connected = is_connected(inc);

    const TableLayout layout = config.extra_factor_columns.empty() ? TableLayout::BlockTwoFactor
                                                                   : TableLayout::MultiFactor;

    AnalysisReport report;
    report.design = design;
    report.n = n;
    report.anova = build_table(layout, outcome, n, connected, config.tol);

    const Factor& trt = table.factors[1];
    const FitResult& trt_fit = outcome.terms[treatment_term];
    for (std::size_t j = 0; j < trt_fit.effects.size(); ++j)
        report.effects.emplace_back(trt.labels[j], trt_fit.effects[j]);

    if (connected) {
        report.efficiency = efficiency_report(design, config.tol);
        if (report.efficiency->is_bib) {
            const Projector p_b = projector_from_design(terms[0].design, config.tol);
            const Projector p_t =
                projector_from_design(terms[treatment_term].design, config.tol);
            const Vector three =
                bib_three_stage(p_b, p_t, *report.efficiency->e_bib, table.response, config.tol);
            const Projector& pt_t = outcome.adjusted[treatment_term];
            const Vector two = pt_t.sweep(p_b.sweep(table.response));
            report.three_stage_max_dev = max_abs(three - two);
            std::ostringstream msg;
            msg << "BIB three-stage vs two-stage residual: max abs deviation "
                << std::setprecision(3) << *report.three_stage_max_dev;
            report.diagnostics.push_back(msg.str());
        }
    } else {
        report.diagnostics.push_back("design is disconnected: efficiency factors not defined");
    }

    report.diagnostics.insert(report.diagnostics.end(), report.anova.diagnostics.begin(),
                              report.anova.diagnostics.end());
    report.anova.diagnostics.clear();
    return report;
}

inline nlohmann::json design_to_json(const BlockDesign& d) {
    nlohmann::json units = nlohmann::json::array();
    for (const auto& [blk, trt] : d.assignment())
        units.push_back({{"block", d.block_labels()[blk]},
                         {"treatment", d.treatment_labels()[trt]}});
    return {{"v", d.v()}, {"b", d.b()}, {"k", d.k()}, {"r", d.r()}, {"units", units}};
}

// Rebuild a BlockDesign from a JSON design echo; level labels map to indices
// in first-appearance order, exactly as CSV ingestion does.
inline BlockDesign design_from_json(const nlohmann::json& j) {
    std::vector<std::string> block_labels, treatment_labels;
    std::vector<std::pair<std::size_t, std::size_t>> assignment;
    auto level_of = [](std::vector<std::string>& labels, const std::string& value) {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == value) return i;
        labels.push_back(value);
        return labels.size() - 1;
    };
    for (const auto& unit : j.at("units")) {
        const std::size_t blk = level_of(block_labels, unit.at("block").get<std::string>());
        const std::size_t trt = level_of(treatment_labels, unit.at("treatment").get<std::string>());
        assignment.emplace_back(blk, trt);
    }
    const std::size_t v = treatment_labels.size();
    const std::size_t b = block_labels.size();
    BlockDesign d = BlockDesign::create(v, b, std::move(assignment), std::move(block_labels),
                                        std::move(treatment_labels));
    if (d.v() != j.at("v").get<std::size_t>() || d.b() != j.at("b").get<std::size_t>() ||
        d.k() != j.at("k").get<std::size_t>() || d.r() != j.at("r").get<std::size_t>())
        throw ValidationError("design_from_json: parameters disagree with unit list");
    return d;
}

inline nlohmann::json efficiency_to_json(const EfficiencyReport& rep) {
    nlohmann::json eff = {{"cefs", rep.cefs},
                          {"E", rep.harmonic_mean},
                          {"geometric", rep.geometric_mean},
                          {"min", rep.min_cef}};
    if (rep.is_bib) eff["bib"] = {{"lambda", *rep.lambda}, {"e", *rep.e_bib}};
    return eff;
}

inline nlohmann::json report_to_json(const AnalysisReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& stratum : report.anova.strata)
        for (const auto& row : stratum.rows) {
            nlohmann::json r = {{"stratum", stratum.label},
                                {"source", row.source},
                                {"df", row.df},
                                {"ss", row.ss}};
            if (row.ms) r["ms"] = *row.ms;
            if (row.f) r["f"] = *row.f;
            if (row.p) r["p"] = *row.p;
            rows.push_back(std::move(r));
        }
    rows.push_back({{"source", report.anova.total.source},
                    {"df", report.anova.total.df},
                    {"ss", report.anova.total.ss}});

    nlohmann::json effects = nlohmann::json::object();
    for (const auto& [label, value] : report.effects) effects[label] = value;

    nlohmann::json out = {{"anova", rows},
                          {"effects", effects},
                          {"design", design_to_json(report.design)},
                          {"diagnostics", report.diagnostics}};
    if (report.efficiency) out["efficiency"] = efficiency_to_json(*report.efficiency);
    if (report.three_stage_max_dev) out["three_stage_max_dev"] = *report.three_stage_max_dev;
    return out;
}

inline std::string render_efficiency_text(const EfficiencyReport& rep) {
    std::ostringstream out;
    out << "Efficiency factors\n  cefs:";
    for (double e : rep.cefs) out << " " << detail::format_number(e);
    out << "\n  harmonic mean E: " << detail::format_number(rep.harmonic_mean)
        << "\n  geometric mean:  " << detail::format_number(rep.geometric_mean)
        << "\n  minimum:         " << detail::format_number(rep.min_cef) << "\n";
    if (rep.is_bib)
        out << "  BIB: yes, lambda = " << *rep.lambda
            << ", e = " << detail::format_number(*rep.e_bib) << "\n";
    else
        out << "  BIB: no\n";
    return out.str();
}

inline std::string render_text(const AnalysisReport& report) {
    std::ostringstream out;
    out << "Analysis of variance (n = " << report.n << ")\n";
    out << std::left << std::setw(30) << "Source" << std::right << std::setw(5) << "df"
        << std::setw(14) << "SS" << std::setw(14) << "MS" << std::setw(12) << "F" << std::setw(12)
        << "p" << "\n";

    auto print_row = [&](const AnovaRow& row, int indent) {
        out << std::left << std::setw(30) << (std::string(indent, ' ') + row.source) << std::right
            << std::setw(5) << row.df << std::setw(14) << detail::format_number(row.ss);
        out << std::setw(14) << (row.ms ? detail::format_number(*row.ms) : "");
        out << std::setw(12) << (row.f ? detail::format_number(*row.f) : "");
        out << std::setw(12) << (row.p ? detail::format_p(*row.p) : "");
        out << "\n";
    };

    for (const auto& stratum : report.anova.strata) {
        out << stratum.label << "\n";
        for (const auto& row : stratum.rows) print_row(row, 2);
    }
    print_row(report.anova.total, 0);
    out << "\n";

    out << "Treatment effects (sum to zero)\n";
    for (const auto& [label, value] : report.effects)
        out << "  " << std::left << std::setw(12) << label << std::right
            << detail::format_number(value) << "\n";
    out << "\n";

    if (report.efficiency) out << render_efficiency_text(*report.efficiency);

    if (!report.diagnostics.empty()) {
        out << "\nDiagnostics\n";
        for (const auto& d : report.diagnostics) out << "  " << d << "\n";
    }
    return out.str();
}

struct BibCheckReport {
    long long v = 0, k = 0, r = 0;
    BibCheck check;
};

inline BibCheckReport check_bib_cmd(long long v, long long k, long long r) {
    return BibCheckReport{v, k, r, bib_check(v, k, r)};
}

inline nlohmann::json bib_check_to_json(const BibCheckReport& rep) {
    nlohmann::json out = {{"v", rep.v},
                          {"k", rep.k},
                          {"r", rep.r},
                          {"lambda", {{"num", rep.check.lambda_num}, {"den", rep.check.lambda_den}}},
                          {"feasible", rep.check.feasible}};
    if (rep.check.blocks > 0) out["b"] = rep.check.blocks;
    if (rep.check.e) out["e"] = *rep.check.e;
    if (rep.check.feasible)
        out["note"] = "necessary conditions hold; existence is not guaranteed";
    return out;
}

inline std::string bib_check_to_text(const BibCheckReport& rep) {
    std::ostringstream out;
    out << "BIB feasibility for v = " << rep.v << ", k = " << rep.k << ", r = " << rep.r << "\n";
    out << "  lambda = " << rep.check.lambda_num;
    if (rep.check.lambda_den != 1) out << "/" << rep.check.lambda_den;
    out << "\n";
    if (rep.check.blocks > 0)
        out << "  b = " << rep.check.blocks << "\n";
    else
        out << "  b = " << rep.v << "*" << rep.r << "/" << rep.k << " (not an integer)\n";
    if (rep.check.feasible) {
        const long long num = rep.check.lambda_num * rep.v;
        const long long den = rep.r * rep.k * rep.check.lambda_den;
        const long long g = std::gcd(num, den);
        out << "  feasible: yes\n  e = " << num / g << "/" << den / g << " = "
            << detail::format_number(*rep.check.e) << "\n";
        out << "  note: these conditions are necessary only; designs with feasible\n"
               "        parameters are known not to exist (e.g. v = b = 22, r = k = 7)\n";
    } else {
        out << "  feasible: no";
        if (rep.check.lambda_den != 1) out << " (lambda is not an integer)";
        else if (rep.check.blocks == 0) out << " (b is not an integer)";
        else if (rep.check.blocks < rep.v) out << " (b < v)";
        out << "\n";
    }
    return out.str();
}

}  // namespace sweepaov
