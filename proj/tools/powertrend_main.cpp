#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "powertrend/asymptotics.hpp"
#include "powertrend/design.hpp"
#include "powertrend/errors.hpp"
#include "powertrend/grid_io.hpp"
#include "powertrend/montecarlo.hpp"
#include "powertrend/nlse.hpp"
#include "powertrend/simulate.hpp"
#include "powertrend/spectral.hpp"

namespace {

using nlohmann::json;
using namespace powertrend;

constexpr const char* kVersion = "powertrend 0.1.0";

std::vector<std::vector<double>> nest(const std::vector<double>& flat,
                                      const std::vector<int>& p_per_dim) {
    std::vector<std::vector<double>> dims(p_per_dim.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < p_per_dim.size(); ++i) {
        if (pos + p_per_dim[i] > flat.size())
            throw std::invalid_argument("parameter list shorter than sum of p");
        dims[i].assign(flat.begin() + pos, flat.begin() + pos + p_per_dim[i]);
        pos += p_per_dim[i];
    }
    if (pos != flat.size())
        throw std::invalid_argument("parameter list longer than sum of p");
    return dims;
}

MaKernel kernel_from_json(const json& spec) {
    MaKernel kernel;
    if (!spec.contains("offsets") || !spec["offsets"].is_array())
        throw std::invalid_argument("kernel json needs an offsets array");
    for (const auto& entry : spec["offsets"]) {
        if (!entry.is_array() || entry.size() < 2)
            throw std::invalid_argument("each offset entry is [j,...,coef]");
        MaKernel::Tap tap;
        for (std::size_t k = 0; k + 1 < entry.size(); ++k)
            tap.offset.push_back(entry[k].get<int>());
        tap.coef = entry.back().get<double>();
        kernel.taps.push_back(std::move(tap));
    }
    if (spec.contains("sigma_eps")) kernel.sigma_eps = spec["sigma_eps"].get<double>();
    kernel.validate();
    return kernel;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << content;
}

json inference_json(const InferenceReport& rep,
                    const std::map<std::string, double>& nulls) {
    json params = json::array();
    for (int a = 0; a < static_cast<int>(rep.params.size()); ++a) {
        const auto& par = rep.params[a];
        json entry{{"name", par.name},
                   {"estimate", par.estimate},
                   {"se", par.se},
                   {"ci95", {par.ci95[0], par.ci95[1]}}};
        if (auto it = nulls.find(par.name); it != nulls.end()) {
            const WaldResult w = wald_test(rep, a, it->second);
            entry["null"] = it->second;
            entry["z_vs_null"] = w.z;
            entry["p_value"] = w.p_value;
        }
        params.push_back(std::move(entry));
    }
    json cov = json::array();
    for (int r = 0; r < rep.covariance.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < rep.covariance.cols(); ++c) row.push_back(rep.covariance(r, c));
        cov.push_back(std::move(row));
    }
    return json{{"two_pi_f0", rep.two_pi_f0}, {"parameters", params}, {"covariance", cov}};
}

int cmd_fit(const std::string& input, int dims, std::vector<int> p_per_dim,
            std::vector<double> lower, std::vector<double> upper, double delta,
            const std::string& lrv_mode, std::vector<int> bandwidth,
            const std::vector<std::string>& null_specs, const std::string& out_path) {
    ModelSpec spec;
    spec.d = dims;
    spec.p_per_dim = p_per_dim;
    spec.validate();

    ParamSpace space = ParamSpace::defaults(dims);
    if (!lower.empty()) space.lower = lower;
    if (!upper.empty()) space.upper = upper;
    space.delta = delta;
    space.validate(spec);

    const LatticeGrid grid = read_grid_csv_file(input);
    if (static_cast<int>(grid.extents.size()) != dims)
        throw std::invalid_argument("grid dimension differs from --dims");

    std::map<std::string, double> nulls;
    for (const auto& s : null_specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--null expects name=value");
        nulls[s.substr(0, eq)] = std::stod(s.substr(eq + 1));
    }

    const FitResult result = fit(grid, spec, space);
    const ProfileResult prof = profile_beta(result.theta_hat, grid);

    LrvOptions lrv;
    lrv.bandwidth = bandwidth;
    double f0;
    if (lrv_mode == "independence") {
        f0 = lrv_independence(prof.residuals);
    } else if (lrv_mode == "nonparametric") {
        lrv.mode = LrvOptions::Mode::nonparametric;
        f0 = lrv_nonparametric(prof.residuals, lrv);
    } else {
        throw std::invalid_argument("--lrv must be independence or nonparametric");
    }
    if (f0 <= 0.0) {
        std::cerr << "warning: degenerate fit, residual variance is zero\n";
        f0 = std::numeric_limits<double>::min();
    }
    const InferenceReport rep = covariance(result, grid.extents, f0);

    json doc;
    doc["model"] = {{"dims", dims}, {"p", p_per_dim}};
    doc["fit"] = {{"theta_hat", result.theta_hat.dims},
                  {"beta_hat", result.beta_hat.dims},
                  {"rss", result.rss},
                  {"sigma2_hat", result.sigma2_hat},
                  {"n_evals", result.n_evals},
                  {"converged", result.converged},
                  {"gram_condition", result.gram_condition},
                  {"warnings", result.warnings}};
    doc["lrv"] = {{"mode", lrv_mode}, {"two_pi_f0", f0}};
    doc["inference"] = inference_json(rep, nulls);
    write_output(out_path, doc.dump(2) + "\n");
    return 0;
}

int cmd_simulate(const std::string& kernel_name, const std::string& kernel_json,
                 double iid_sigma, std::vector<int> extents, std::uint64_t seed,
                 std::vector<int> p_per_dim, std::vector<double> theta_flat,
                 std::vector<double> beta_flat, const std::string& out_path) {
    ErrorFieldModel model;
    if (!kernel_json.empty()) {
        model = ErrorFieldModel::finite_ma(kernel_from_json(json::parse(kernel_json)));
    } else if (!kernel_name.empty() && kernel_name != "iid") {
        model = ErrorFieldModel::finite_ma(builtin_kernel(kernel_name));
    } else {
        model = ErrorFieldModel::iid(iid_sigma);
    }
    if (model.kind == ErrorFieldModel::Kind::finite_ma &&
        std::abs(model.kernel.coefficient_sum()) < 1e-12)
        std::cerr << "warning: kernel coefficients sum to zero; the long-run "
                     "variance vanishes and trend inference is invalid\n";

    LatticeGrid grid;
    if (!theta_flat.empty() || !beta_flat.empty()) {
        if (p_per_dim.empty())
            throw std::invalid_argument("--theta/--beta require --p");
        ExponentVector theta{nest(theta_flat, p_per_dim)};
        CoefficientVector beta{nest(beta_flat, p_per_dim)};
        grid = gen_dataset(theta, beta, model, extents, seed);
    } else {
        grid = gen_error_field(model, extents, seed);
    }

    std::ostringstream os;
    write_grid_csv(os, grid);
    write_output(out_path, os.str());
    return 0;
}

StudyConfig study_config_from_json(const json& doc) {
    StudyConfig cfg;
    cfg.theta.dims = doc.at("theta").get<std::vector<std::vector<double>>>();
    cfg.beta.dims = doc.at("beta").get<std::vector<std::vector<double>>>();
    cfg.extents_list = doc.at("extents").get<std::vector<std::vector<int>>>();
    const int d = static_cast<int>(cfg.theta.dims.size());
    cfg.space = ParamSpace::defaults(d);
    if (doc.contains("space")) {
        const auto& sp = doc["space"];
        if (sp.contains("lower")) cfg.space.lower = sp["lower"].get<std::vector<double>>();
        if (sp.contains("upper")) cfg.space.upper = sp["upper"].get<std::vector<double>>();
        if (sp.contains("delta")) cfg.space.delta = sp["delta"].get<double>();
    }
    if (doc.contains("error")) {
        const auto& err = doc["error"];
        const std::string kind = err.value("kind", "iid");
        if (kind == "iid") {
            cfg.error_model = ErrorFieldModel::iid(err.value("sigma", 1.0));
        } else if (kind == "kernel") {
            if (err.contains("name"))
                cfg.error_model =
                    ErrorFieldModel::finite_ma(builtin_kernel(err["name"].get<std::string>()));
            else
                cfg.error_model = ErrorFieldModel::finite_ma(kernel_from_json(err));
        } else {
            throw std::invalid_argument("error.kind must be iid or kernel");
        }
    }
    if (doc.contains("replications")) cfg.replications = doc["replications"].get<int>();
    if (doc.contains("estimators")) {
        cfg.run_nlse = false;
        cfg.run_lse = false;
        for (const auto& e : doc["estimators"]) {
            if (e == "nlse") cfg.run_nlse = true;
            else if (e == "lse") cfg.run_lse = true;
            else throw std::invalid_argument("estimators must be nlse or lse");
        }
    }
    if (doc.contains("lrv")) {
        const auto& l = doc["lrv"];
        if (l.value("mode", "independence") == std::string("nonparametric"))
            cfg.lrv.mode = LrvOptions::Mode::nonparametric;
        if (l.contains("bandwidth")) cfg.lrv.bandwidth = l["bandwidth"].get<std::vector<int>>();
    }
    if (doc.contains("report_sizes")) cfg.report_sizes = doc["report_sizes"].get<bool>();
    return cfg;
}

json study_json(const StudyReport& report) {
    json rows = json::array();
    for (const auto& cell : report.cells) {
        json row{{"extents", cell.extents},
                 {"estimator", cell.estimator},
                 {"parameter", cell.parameter},
                 {"bias", cell.bias},
                 {"mse", cell.mse},
                 {"failures", cell.failures}};
        if (cell.size5) row["size5"] = *cell.size5;
        if (cell.size1) row["size1"] = *cell.size1;
        rows.push_back(std::move(row));
    }
    return json{{"cells", rows}};
}

int cmd_study(int paper_table, const std::string& config_path, int reps,
              std::uint64_t seed, int threads, const std::string& format,
              const std::string& out_path) {
    StudyConfig cfg;
    if (paper_table > 0 && !config_path.empty())
        throw std::invalid_argument("--paper-table and --config are exclusive");
    if (paper_table > 0) {
        cfg = paper_study(paper_table);
    } else if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open " + config_path);
        cfg = study_config_from_json(json::parse(in));
    } else {
        throw std::invalid_argument("study needs --paper-table or --config");
    }
    if (reps > 0) cfg.replications = reps;
    cfg.base_seed = seed;

    const StudyReport report = run_study(cfg, threads);
    if (format == "csv") {
        write_output(out_path, study_csv(report));
    } else if (format == "json") {
        write_output(out_path, study_json(report).dump(2) + "\n");
    } else {
        throw std::invalid_argument("--format must be csv or json");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Power-law trend fitting on regular lattices"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit the trend model to a grid CSV");
    std::string fit_input, fit_out, fit_lrv = "independence";
    int fit_dims = 0;
    std::vector<int> fit_p, fit_bandwidth;
    std::vector<double> fit_lower, fit_upper;
    std::vector<std::string> fit_nulls;
    double fit_delta = 0.05;
    fit_cmd->add_option("--input", fit_input, "Grid CSV (header u1,...,ud,y)")->required();
    fit_cmd->add_option("--dims", fit_dims, "Lattice dimension d")->required();
    fit_cmd->add_option("--p", fit_p, "Power terms per dimension")
        ->required()
        ->delimiter(',');
    fit_cmd->add_option("--lower", fit_lower, "Exponent lower bounds (default -0.45)")
        ->delimiter(',');
    fit_cmd->add_option("--upper", fit_upper, "Exponent upper bounds (default 4)")
        ->delimiter(',');
    fit_cmd->add_option("--delta", fit_delta, "Within-dimension separation");
    fit_cmd->add_option("--lrv", fit_lrv, "independence|nonparametric");
    fit_cmd->add_option("--bandwidth", fit_bandwidth, "Lag bandwidths m1,...,md")
        ->delimiter(',');
    fit_cmd->add_option("--null", fit_nulls, "Wald null, e.g. theta1_1=1 (repeatable)");
    fit_cmd->add_option("--out", fit_out, "Output JSON path (default stdout)");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Generate an error field or dataset CSV");
    std::string sim_kernel, sim_kernel_json, sim_out;
    double sim_sigma = 1.0;
    std::vector<int> sim_n, sim_p;
    std::vector<double> sim_theta, sim_beta;
    std::uint64_t sim_seed = 0;
    sim_cmd->add_option("--kernel", sim_kernel, "iid|ma1|ma4|ma9 (or full names)");
    sim_cmd->add_option("--kernel-json", sim_kernel_json,
                        "Inline kernel {\"offsets\":[[j,k,coef],...]}");
    sim_cmd->add_option("--sigma", sim_sigma, "IID standard deviation");
    sim_cmd->add_option("--n", sim_n, "Extents n1,...,nd")->required()->delimiter(',');
    sim_cmd->add_option("--seed", sim_seed, "RNG seed")->required();
    sim_cmd->add_option("--p", sim_p, "Power terms per dimension (with --theta)")
        ->delimiter(',');
    sim_cmd->add_option("--theta", sim_theta, "Trend exponents, flattened")->delimiter(',');
    sim_cmd->add_option("--beta", sim_beta, "Trend coefficients, flattened")->delimiter(',');
    sim_cmd->add_option("--out", sim_out, "Output CSV path (default stdout)");

    // study
    auto* study_cmd = app.add_subcommand("study", "Run a replication study");
    std::string study_config, study_format = "csv", study_out;
    int study_table = 0, study_reps = 0, study_threads = 0;
    std::uint64_t study_seed = 0;
    study_cmd->add_option("--paper-table", study_table, "Reference table 1..8");
    study_cmd->add_option("--config", study_config, "Study config JSON path");
    study_cmd->add_option("--reps", study_reps, "Replication count override");
    study_cmd->add_option("--seed", study_seed, "Base seed (required)")->required();
    study_cmd->add_option("--threads", study_threads,
                          "Worker threads (default: hardware)");
    study_cmd->add_option("--format", study_format, "csv|json");
    study_cmd->add_option("--out", study_out, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help/--version exit cleanly; anything else is a validation error.
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (fit_cmd->parsed())
            return cmd_fit(fit_input, fit_dims, fit_p, fit_lower, fit_upper, fit_delta,
                           fit_lrv, fit_bandwidth, fit_nulls, fit_out);
        if (sim_cmd->parsed())
            return cmd_simulate(sim_kernel, sim_kernel_json, sim_sigma, sim_n, sim_seed,
                                sim_p, sim_theta, sim_beta, sim_out);
        if (study_cmd->parsed()) {
            const int threads = study_threads > 0
                                    ? study_threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
            return cmd_study(study_table, study_config, study_reps, study_seed,
                             std::max(threads, 1), study_format, study_out);
        }
    } catch (const Error& e) {
        std::cerr << "error: numerical: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: invalid: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
