// Command-line front end: analyze a design file, summarize design
// efficiency, or check BIB feasibility conditions.
//
// Exit codes: 0 success, 2 input/validation error, 3 numerical failure.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sweepaov/report.hpp"

namespace {

sweepaov::Tolerance tolerance_from_flag(double tol) {
    return sweepaov::Tolerance(tol, 100.0 * tol);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Least-squares analysis of block designs via projection "
                 "matrices and sweep operators"};
    app.require_subcommand(1);
    app.fallthrough();  // global --tol/--format may follow the subcommand

    double tol_flag = 1e-10;
    std::string format = "text";
    app.add_option("--tol", tol_flag, "relative tolerance for rank decisions")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--format", format, "output format")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();

    sweepaov::AnalysisConfig config;

    auto* analyze_cmd = app.add_subcommand("analyze", "ANOVA and efficiency for a design file");
    analyze_cmd->add_option("--design", config.design_path, "CSV design file")->required();
    analyze_cmd->add_option("--response-col", config.response_column)->capture_default_str();
    analyze_cmd->add_option("--block-col", config.block_column)->capture_default_str();
    analyze_cmd->add_option("--treatment-col", config.treatment_column)->capture_default_str();
    analyze_cmd->add_option("--factor", config.extra_factor_columns,
                            "extra factor column (repeatable); treatments are adjusted last");

    auto* efficiency_cmd =
        app.add_subcommand("efficiency", "efficiency factors only (no response needed)");
    efficiency_cmd->add_option("--design", config.design_path, "CSV design file")->required();
    efficiency_cmd->add_option("--block-col", config.block_column)->capture_default_str();
    efficiency_cmd->add_option("--treatment-col", config.treatment_column)->capture_default_str();

    long long v = 0, k = 0, r = 0;
    auto* checkbib_cmd = app.add_subcommand("check-bib", "BIB feasibility conditions");
    checkbib_cmd->add_option("--v", v, "number of treatments")->required();
    checkbib_cmd->add_option("--k", k, "block size")->required();
    checkbib_cmd->add_option("--r", r, "replication")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        config.tol = tolerance_from_flag(tol_flag);
        config.output_format =
            format == "json" ? sweepaov::OutputFormat::Json : sweepaov::OutputFormat::Text;

        if (analyze_cmd->parsed()) {
            const sweepaov::AnalysisReport report = sweepaov::analyze(config);
            if (config.output_format == sweepaov::OutputFormat::Json)
                std::cout << sweepaov::report_to_json(report).dump(2) << "\n";
            else
                std::cout << sweepaov::render_text(report);
        } else if (efficiency_cmd->parsed()) {
            const sweepaov::IngestResult in =
                sweepaov::ingest(config.design_path, config, false);
            const sweepaov::EfficiencyReport rep =
                sweepaov::efficiency_report(*in.design, config.tol);
            if (config.output_format == sweepaov::OutputFormat::Json) {
                nlohmann::json out = {{"efficiency", sweepaov::efficiency_to_json(rep)},
                                      {"design", sweepaov::design_to_json(*in.design)}};
                std::cout << out.dump(2) << "\n";
            } else {
                std::cout << sweepaov::render_efficiency_text(rep);
            }
        } else if (checkbib_cmd->parsed()) {
            const sweepaov::BibCheckReport rep = sweepaov::check_bib_cmd(v, k, r);
            if (config.output_format == sweepaov::OutputFormat::Json)
                std::cout << sweepaov::bib_check_to_json(rep).dump(2) << "\n";
            else
                std::cout << sweepaov::bib_check_to_text(rep);
        }
    } catch (const sweepaov::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sweepaov::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
