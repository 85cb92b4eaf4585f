// pulasso command-line front end: fit / cv / predict / simulate / evaluate /
// ingest with reproducible, manifest-stamped outputs.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pulasso/evaluate.hpp"
#include "pulasso/io.hpp"
#include "pulasso/model.hpp"
#include "pulasso/rng.hpp"
#include "pulasso/simulate.hpp"
#include "pulasso/solver.hpp"
#include "pulasso/version.hpp"

using json = nlohmann::json;
using namespace pulasso;

namespace {

int log_level() {
    const char* e = std::getenv("PULASSO_LOG");
    if (!e) return 0;
    std::string v(e);
    if (v == "debug") return 2;
    if (v == "info") return 1;
    return 0;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[pulasso] " << msg << "\n";
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

struct Manifest {
    json doc;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    Manifest(const std::string& command, std::uint64_t seed) {
        doc["command"] = command;
        doc["version"] = version();
        doc["seed"] = seed;
        doc["inputs"] = json::object();
        doc["outputs"] = json::array();
        doc["config"] = json::object();
    }
    void input(const std::string& path) { doc["inputs"][path] = file_digest(path); }
    void output(const std::string& path) { doc["outputs"].push_back(path); }
    void write(const std::string& path) {
        doc["timing"]["wall_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open output file: " + path);
        out << doc.dump(2) << "\n";
    }
};

std::string manifest_name(const std::string& prefix) { return prefix + ".manifest.json"; }

VectorXi read_binary_vector(const std::string& path, const std::string& what) {
    VectorXd raw = io::read_csv_vector(path);
    VectorXi out(raw.size());
    for (Index i = 0; i < raw.size(); ++i) {
        if (raw[i] != 0.0 && raw[i] != 1.0)
            throw std::runtime_error(what + " column must be binary (0/1), got " +
                                     std::to_string(raw[i]));
        out[i] = raw[i] == 1.0 ? 1 : 0;
    }
    return out;
}

struct DesignInput {
    bool sparse = false;
    MatrixXd dense;
    SparseMatrixd sp;
    std::vector<std::string> col_names;

    Index rows() const { return sparse ? sp.rows() : dense.rows(); }
    Index cols() const { return sparse ? sp.cols() : dense.cols(); }
};

DesignInput read_design(const std::string& path) {
    DesignInput d;
    if (path.size() > 4 && path.substr(path.size() - 4) == ".mtx") {
        d.sparse = true;
        d.sp = io::read_matrix_market(path);
        for (Index c = 0; c < d.sp.cols(); ++c) d.col_names.push_back("x" + std::to_string(c + 1));
    } else {
        auto named = io::read_csv_matrix(path);
        d.dense = std::move(named.x);
        d.col_names = std::move(named.col_names);
    }
    return d;
}

struct FitOptions {
    std::string x_path, z_path, groups_path, out = "pulasso";
    double pi = 0.0;
    int n_lambda = 100;
    std::optional<double> lambda_min_ratio;
    std::vector<double> user_lambda;
    SolverConfig solver;
    std::uint64_t seed = 0;
    int jobs = 1;

    void add_common(CLI::App* cmd, bool need_pi = true) {
        cmd->add_option("--x", x_path, "design matrix (.csv with header, or .mtx)")->required();
        cmd->add_option("--z", z_path, "binary label column (1 = labeled positive)")->required();
        auto* pi_opt = cmd->add_option("--pi", pi, "known positive prevalence, in (0,1)")
                           ->check(CLI::Range(std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0)));
        if (need_pi) pi_opt->required();
        cmd->add_option("--groups", groups_path,
                        "TSV of (column_name, group_id, optional weight); default: one group per column");
        cmd->add_option("--nlambda", n_lambda, "path length")->check(CLI::PositiveNumber);
        cmd->add_option("--lambda-min-ratio", lambda_min_ratio,
                        "smallest lambda as a fraction of lambda_max");
        cmd->add_option("--lambda", user_lambda, "explicit decreasing lambda sequence")
            ->delimiter(',');
        cmd->add_option("--inner-tol", solver.inner_tol, "BCD tolerance");
        cmd->add_option("--outer-tol", solver.outer_tol, "outer loop tolerance");
        cmd->add_option("--max-inner", solver.max_inner_iters, "BCD cycle cap");
        cmd->add_option("--max-outer", solver.max_outer_iters, "outer iteration cap");
        cmd->add_flag_callback("--no-strong-rules", [this] { solver.use_strong_rules = false; },
                               "disable strong-rule screening");
        cmd->add_option("--seed", seed, "root RNG seed");
        cmd->add_option("--jobs", jobs, "worker threads for folds/replicates")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--out", out, "output file prefix");
    }

    PathConfig path_config() const {
        PathConfig p;
        p.n_lambda = n_lambda;
        p.lambda_min_ratio = lambda_min_ratio;
        p.user_lambda = user_lambda;
        return p;
    }

    json config_json() const {
        json c;
        c["nlambda"] = n_lambda;
        if (lambda_min_ratio) c["lambda_min_ratio"] = *lambda_min_ratio;
        if (!user_lambda.empty()) c["lambda"] = user_lambda;
        c["inner_tol"] = solver.inner_tol;
        c["outer_tol"] = solver.outer_tol;
        c["max_inner"] = solver.max_inner_iters;
        c["max_outer"] = solver.max_outer_iters;
        c["strong_rules"] = solver.use_strong_rules;
        c["jobs"] = jobs;
        return c;
    }
};

GroupSpec groups_for(const FitOptions& opt, const std::vector<std::string>& col_names,
                     Manifest& man) {
    if (opt.groups_path.empty()) return GroupSpec::singletons(static_cast<Index>(col_names.size()));
    man.input(opt.groups_path);
    try {
        return io::read_group_tsv(opt.groups_path, col_names);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("malformed group spec: ") + e.what());
    }
}

void write_path_csv(const std::string& path, const std::vector<FitResult>& fits,
                    const std::vector<std::string>& col_names, const std::string& manifest) {
    std::vector<std::string> header{"lambda", "objective",  "active_groups", "converged",
                                    "outer_iters", "inner_iters", "kkt", "theta_intercept"};
    for (const auto& c : col_names) header.push_back("theta_" + c);
    std::vector<std::vector<std::string>> rows;
    for (const auto& f : fits) {
        std::vector<std::string> row{io::format_double(f.lambda),
                                     io::format_double(f.objective),
                                     std::to_string(f.active_groups.size()),
                                     f.converged ? "1" : "0",
                                     std::to_string(f.outer_iters),
                                     std::to_string(f.inner_iters),
                                     io::format_double(f.kkt)};
        for (Index i = 0; i < f.coef.theta.size(); ++i)
            row.push_back(io::format_double(f.coef.theta[i]));
        rows.push_back(std::move(row));
    }
    io::write_csv(path, header, rows, "manifest: " + manifest);
}

template <class Fn>
void with_design(const DesignInput& din, const VectorXi& z, double pi, const GroupSpec& spec,
                 Fn&& fn) {
    if (din.sparse) {
        auto d = make_pu_data(SparseMatrixd(din.sp), VectorXi(z), pi);
        Standardizer sd = build_standardizer(d.x, spec, DesignMode::sparse);
        fn(d, sd);
    } else {
        auto d = make_pu_data(MatrixXd(din.dense), VectorXi(z), pi);
        Standardizer sd = build_standardizer(d.x, spec, DesignMode::dense);
        fn(d, sd);
    }
}

// ------------------------------------------------------------------ fit ----

int cmd_fit(const FitOptions& opt) {
    Manifest man("fit", opt.seed);
    man.input(opt.x_path);
    man.input(opt.z_path);
    man.doc["config"] = opt.config_json();

    DesignInput din = read_design(opt.x_path);
    VectorXi z = read_binary_vector(opt.z_path, "z");
    GroupSpec spec = groups_for(opt, din.col_names, man);

    std::vector<FitResult> fits;
    with_design(din, z, opt.pi, spec, [&](const auto& d, const Standardizer& sd) {
        man.doc["n_labeled"] = d.n_labeled;
        man.doc["n_unlabeled"] = d.n_unlabeled;
        man.doc["pi"] = d.pi;
        fits = fit_path(d, sd, opt.path_config(), opt.solver);
    });

    const std::string path_file = opt.out + ".path.csv";
    write_path_csv(path_file, fits, din.col_names, manifest_name(opt.out));
    man.output(path_file);
    man.doc["feature_names"] = din.col_names;
    json lams = json::array();
    for (const auto& f : fits) lams.push_back(f.lambda);
    man.doc["lambda"] = lams;
    man.write(manifest_name(opt.out));
    log_info("fit: wrote " + path_file + " (" + std::to_string(fits.size()) + " lambdas)");
    return 0;
}

// ------------------------------------------------------------------- cv ----

int cmd_cv(const FitOptions& opt, int k) {
    Manifest man("cv", opt.seed);
    man.input(opt.x_path);
    man.input(opt.z_path);
    man.doc["config"] = opt.config_json();
    man.doc["config"]["k"] = k;

    DesignInput din = read_design(opt.x_path);
    VectorXi z = read_binary_vector(opt.z_path, "z");
    GroupSpec spec = groups_for(opt, din.col_names, man);

    CvResult cv;
    if (din.sparse) {
        auto d = make_pu_data(SparseMatrixd(din.sp), VectorXi(z), opt.pi);
        cv = cross_validate(d, spec, DesignMode::sparse, opt.path_config(), opt.solver, k,
                            opt.seed, opt.jobs);
    } else {
        auto d = make_pu_data(MatrixXd(din.dense), VectorXi(z), opt.pi);
        cv = cross_validate(d, spec, DesignMode::dense, opt.path_config(), opt.solver, k,
                            opt.seed, opt.jobs);
    }

    const std::string cv_file = opt.out + ".cv.csv";
    std::vector<std::vector<std::string>> rows;
    for (std::size_t l = 0; l < cv.lambda.size(); ++l)
        rows.push_back({io::format_double(cv.lambda[l]), io::format_double(cv.mean_deviance[l]),
                        io::format_double(cv.se_deviance[l])});
    io::write_csv(cv_file, {"lambda", "mean_deviance", "se_deviance"}, rows,
                  "manifest: " + manifest_name(opt.out));
    man.output(cv_file);

    const std::string sel_file = opt.out + ".selections.csv";
    std::vector<std::vector<std::string>> sel_rows;
    for (std::size_t f = 0; f < cv.fold_active.size(); ++f) {
        for (std::size_t l = 0; l < cv.fold_active[f].size(); ++l) {
            std::ostringstream ids;
            for (std::size_t g = 0; g < cv.fold_active[f][l].size(); ++g)
                ids << (g ? " " : "") << cv.fold_active[f][l][g];
            sel_rows.push_back({std::to_string(l), std::to_string(f), ids.str()});
        }
    }
    io::write_csv(sel_file, {"key", "fold", "selection"}, sel_rows,
                  "manifest: " + manifest_name(opt.out));
    man.output(sel_file);

    man.doc["lambda_min"] = cv.lambda_min;
    man.doc["lambda_1se"] = cv.lambda_1se;
    man.doc["index_min"] = cv.index_min;
    man.doc["index_1se"] = cv.index_1se;
    man.write(manifest_name(opt.out));
    std::cout << "lambda_min " << io::format_double(cv.lambda_min) << "\n"
              << "lambda_1se " << io::format_double(cv.lambda_1se) << "\n";
    return 0;
}

// -------------------------------------------------------------- predict ----

int cmd_predict(const std::string& model_path, const std::string& manifest_path,
                const std::string& x_path, std::optional<double> at_lambda,
                std::optional<int> at_index, bool strict, const std::string& out) {
    Manifest man("predict", 0);
    man.input(model_path);
    man.input(manifest_path);
    man.input(x_path);

    std::ifstream mf(manifest_path);
    if (!mf) throw std::runtime_error("cannot open input file: " + manifest_path);
    json model_meta = json::parse(mf);
    const double pi = model_meta.at("pi");
    const Index n_l = model_meta.at("n_labeled");
    const Index n_u = model_meta.at("n_unlabeled");
    const std::vector<std::string> feature_names = model_meta.at("feature_names");

    io::CsvTable path_table = io::read_csv_table(model_path);
    const std::size_t n_meta_cols = 7; // lambda..kkt before theta columns
    if (path_table.header.size() != n_meta_cols + 1 + feature_names.size())
        throw std::runtime_error("path file does not match its manifest");

    DesignInput din = read_design(x_path);
    if (din.cols() != static_cast<Index>(feature_names.size()))
        throw std::runtime_error("new design has " + std::to_string(din.cols()) +
                                 " columns, model expects " +
                                 std::to_string(feature_names.size()));

    // pick the lambda record
    std::vector<double> lambdas;
    for (const auto& row : path_table.rows) lambdas.push_back(io::parse_double(row[0]));
    std::size_t pick = 0;
    if (at_index) {
        if (*at_index < 0 || static_cast<std::size_t>(*at_index) >= lambdas.size())
            throw std::runtime_error("lambda index out of range");
        pick = static_cast<std::size_t>(*at_index);
    } else if (at_lambda) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            const double dist = std::abs(lambdas[i] - *at_lambda);
            if (dist < best) {
                best = dist;
                pick = i;
            }
        }
        if (best > 1e-12 * std::max(1.0, std::abs(*at_lambda))) {
            if (strict)
                throw std::runtime_error("lambda " + std::to_string(*at_lambda) +
                                         " is not on the fitted path");
            std::cerr << "warning: lambda " << *at_lambda << " not on path, using nearest "
                      << lambdas[pick] << "\n";
        }
    } else {
        pick = lambdas.size() - 1;
    }

    VectorXd theta(feature_names.size() + 1);
    for (std::size_t c = 0; c < feature_names.size() + 1; ++c)
        theta[static_cast<Index>(c)] = io::parse_double(path_table.rows[pick][n_meta_cols + c]);

    VectorXd lp;
    if (din.sparse)
        lp = linear_predictor(din.sp, theta);
    else
        lp = linear_predictor(din.dense, theta);
    const double c0 = std::log(static_cast<double>(n_l)) - std::log(pi) -
                      std::log(static_cast<double>(n_u));

    std::vector<std::vector<std::string>> rows;
    for (Index i = 0; i < lp.size(); ++i) {
        const double py = sigmoid(lp[i]);
        const double pz = sigmoid(c0 + lp[i] - log1pexp(lp[i]));
        rows.push_back({io::format_double(py), io::format_double(pz)});
    }
    const std::string score_file = out + ".scores.csv";
    io::write_csv(score_file, {"prob_y", "prob_z"}, rows, "manifest: " + manifest_name(out));
    man.output(score_file);
    man.doc["lambda_used"] = lambdas[pick];
    man.doc["lambda_index"] = pick;
    man.write(manifest_name(out));
    return 0;
}

// ------------------------------------------------------------- simulate ----

int cmd_simulate_mse(Index p, const std::vector<Index>& s_grid, const std::vector<Index>& n_grid,
                     int reps, const std::vector<std::string>& cs_spec, std::uint64_t seed,
                     int jobs, const std::string& out) {
    Manifest man("simulate mse", seed);
    std::map<Index, double> c_s;
    for (const auto& kv : cs_spec) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::runtime_error("--cs expects s=value entries");
        c_s[std::stol(kv.substr(0, eq))] = io::parse_double(kv.substr(eq + 1));
    }
    man.doc["config"] = {{"p", p}, {"s", s_grid}, {"n", n_grid}, {"reps", reps}, {"jobs", jobs}};

    auto table = mse_experiment(p, s_grid, n_grid, reps, c_s, seed, {}, jobs);

    std::vector<std::vector<std::string>> rows;
    for (const auto& cell : table)
        rows.push_back({std::to_string(cell.s), std::to_string(cell.n),
                        io::format_double(cell.x_value), io::format_double(cell.mean_error),
                        io::format_double(cell.se_error), std::to_string(cell.n_dropped),
                        io::format_double(cell.c_s)});
    const std::string file = out + ".mse.csv";
    io::write_csv(file, {"s", "n", "sqrt_s_logp_over_n", "mean_l2_error", "se", "dropped", "c_s"},
                  rows, "manifest: " + manifest_name(out));
    man.output(file);
    json cal = json::object();
    for (const auto& cell : table) cal[std::to_string(cell.s)] = cell.c_s;
    man.doc["c_s"] = cal;
    man.write(manifest_name(out));
    return 0;
}

int cmd_simulate_classify(const SimConfig& base, int reps, Index n_test, int cv_k,
                          int n_lambda, double lambda_min_ratio, int jobs,
                          const std::string& out) {
    Manifest man("simulate classify", base.seed);
    man.doc["config"] = {{"p", base.p},     {"s", base.s},       {"d", base.d},
                         {"rho", base.rho}, {"nl", base.n_labeled}, {"nu", base.n_unlabeled},
                         {"reps", reps},    {"ntest", n_test},   {"cvk", cv_k}};
    PathConfig pcfg;
    pcfg.n_lambda = n_lambda;
    pcfg.lambda_min_ratio = lambda_min_ratio;
    auto table = classification_experiment({base}, reps, n_test, cv_k, pcfg, {}, jobs);

    std::vector<std::vector<std::string>> rows;
    for (const auto& cell : table)
        rows.push_back({cell.method, std::to_string(cell.config.p), std::to_string(cell.config.s),
                        io::format_double(cell.config.d), io::format_double(cell.config.rho),
                        cell.config.scheme == Scheme::logistic ? "logistic" : "misspecified",
                        std::to_string(cell.reps), io::format_double(cell.mean_misclass),
                        io::format_double(cell.se_misclass), io::format_double(cell.mean_f1),
                        io::format_double(cell.se_f1)});
    const std::string file = out + ".classify.csv";
    io::write_csv(file,
                  {"method", "p", "s", "d", "rho", "scheme", "reps", "mean_misclass",
                   "se_misclass", "mean_f1", "se_f1"},
                  rows, "manifest: " + manifest_name(out));
    man.output(file);
    man.write(manifest_name(out));
    return 0;
}

// ------------------------------------------------------------- evaluate ----

int cmd_evaluate_auc(const std::string& scores_path, const std::string& z_path, double pi,
                     const std::string& out) {
    Manifest man("evaluate auc", 0);
    man.input(scores_path);
    man.input(z_path);
    VectorXd scores = io::read_csv_vector(scores_path);
    VectorXi z = read_binary_vector(z_path, "z");
    RocCurve roc = adjusted_roc(scores, z, pi);

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < roc.thresholds.size(); ++i)
        rows.push_back({io::format_double(roc.thresholds[i]), io::format_double(roc.tp_rate[i]),
                        io::format_double(roc.fp_naive[i]),
                        io::format_double(roc.fp_adjusted[i])});
    const std::string file = out + ".roc.csv";
    io::write_csv(file, {"threshold", "tp_rate", "fp_naive", "fp_adjusted"}, rows,
                  "manifest: " + manifest_name(out));
    man.output(file);
    man.doc["auc_naive"] = roc.auc_naive;
    man.doc["auc_adjusted"] = roc.auc_adjusted;
    man.doc["pi"] = pi;
    man.write(manifest_name(out));
    std::cout << "auc_naive " << io::format_double(roc.auc_naive) << "\n"
              << "auc_adjusted " << io::format_double(roc.auc_adjusted) << "\n";
    return 0;
}

int cmd_evaluate_metrics(const std::string& pred_path, const std::string& truth_path,
                         const std::string& out) {
    Manifest man("evaluate metrics", 0);
    man.input(pred_path);
    man.input(truth_path);
    VectorXi pred = read_binary_vector(pred_path, "pred");
    VectorXi truth = read_binary_vector(truth_path, "truth");
    const double rate = misclassification_rate(pred, truth);
    const double f1 = f1_score(pred, truth);
    man.doc["misclassification"] = rate;
    man.doc["f1"] = f1;
    man.write(manifest_name(out));
    std::cout << "misclassification " << io::format_double(rate) << "\n"
              << "f1 " << io::format_double(f1) << "\n";
    return 0;
}

int cmd_evaluate_stability(const std::string& selections_path, const std::string& out) {
    Manifest man("evaluate stability", 0);
    man.input(selections_path);
    io::CsvTable t = io::read_csv_table(selections_path);
    if (t.header.size() < 2) throw std::runtime_error("selections file needs key + selection columns");
    const std::size_t sel_col = t.header.size() - 1;
    // numeric keys (e.g. lambda indices) order numerically, others lexically
    auto key_less = [](const std::string& a, const std::string& b) {
        char* ea = nullptr;
        char* eb = nullptr;
        const double va = std::strtod(a.c_str(), &ea);
        const double vb = std::strtod(b.c_str(), &eb);
        if (ea == a.c_str() + a.size() && eb == b.c_str() + b.size() && !a.empty() && !b.empty())
            return va < vb;
        return a < b;
    };
    std::map<std::string, std::vector<std::set<Index>>, decltype(key_less)> by_key(key_less);
    for (const auto& row : t.rows) {
        std::set<Index> sel;
        std::istringstream ids(row[sel_col]);
        Index id;
        while (ids >> id) sel.insert(id);
        by_key[row[0]].push_back(std::move(sel));
    }

    std::vector<std::vector<std::string>> rows;
    std::vector<double> all_pairs;
    for (const auto& [key, sels] : by_key) {
        auto summary = stability_summary(sels);
        all_pairs.insert(all_pairs.end(), summary.pair_scores.begin(), summary.pair_scores.end());
        rows.push_back({key, std::to_string(summary.pair_scores.size()),
                        io::format_double(summary.q1), io::format_double(summary.median),
                        io::format_double(summary.mean), io::format_double(summary.q3)});
    }
    const std::string file = out + ".stability.csv";
    io::write_csv(file, {"key", "pairs", "q1", "median", "mean", "q3"}, rows,
                  "manifest: " + manifest_name(out));
    man.output(file);
    double overall = 1.0;
    if (!all_pairs.empty())
        overall = std::accumulate(all_pairs.begin(), all_pairs.end(), 0.0) /
                  static_cast<double>(all_pairs.size());
    man.doc["mean_stability"] = overall;
    man.write(manifest_name(out));
    std::cout << "mean_stability " << io::format_double(overall) << "\n";
    return 0;
}

// --------------------------------------------------------------- ingest ----

int cmd_ingest(const std::string& x_path, const std::string& format,
               const std::string& reference_path, bool binary, const std::string& out) {
    Manifest man("ingest", 0);
    man.input(x_path);
    man.doc["config"] = {{"format", format}, {"binary", binary}};

    if (format == "dense") {
        auto named = io::read_csv_matrix(x_path);
        std::vector<std::vector<std::string>> rows;
        for (Index i = 0; i < named.x.rows(); ++i) {
            std::vector<std::string> row;
            for (Index j = 0; j < named.x.cols(); ++j)
                row.push_back(io::format_double(named.x(i, j)));
            rows.push_back(std::move(row));
        }
        const std::string file = out + ".x.csv";
        io::write_csv(file, named.col_names, rows, "manifest: " + manifest_name(out));
        man.output(file);
    } else if (format == "matrixmarket") {
        SparseMatrixd x = io::read_matrix_market(x_path);
        if (binary) {
            for (int c = 0; c < x.outerSize(); ++c)
                for (SparseMatrixd::InnerIterator it(x, c); it; ++it)
                    if (it.value() != 0.0 && it.value() != 1.0)
                        throw std::runtime_error("--binary asserted but matrix has value " +
                                                 io::format_double(it.value()));
        }
        const std::string file = out + ".x.mtx";
        io::write_matrix_market(file, x, "manifest: " + manifest_name(out));
        man.output(file);
    } else if (format == "categorical") {
        if (reference_path.empty())
            throw std::runtime_error("categorical format requires --reference");
        man.input(reference_path);
        io::CsvTable table = io::read_csv_table(x_path);
        io::CsvTable ref = io::read_csv_table(reference_path);
        if (ref.rows.size() != 1 || ref.header != table.header)
            throw std::runtime_error("reference must be one row with the same columns as --x");
        auto res = io::ingest_categorical(table, ref.rows[0]);
        const std::string xfile = out + ".x.mtx";
        io::write_matrix_market(xfile, res.x, "manifest: " + manifest_name(out));
        man.output(xfile);
        const std::string mapfile = out + ".columns.csv";
        std::vector<std::vector<std::string>> rows;
        for (std::size_t c = 0; c < res.col_names.size(); ++c)
            rows.push_back({std::to_string(c + 1), res.col_names[c]});
        io::write_csv(mapfile, {"column", "name"}, rows, "manifest: " + manifest_name(out));
        man.output(mapfile);
    } else {
        throw std::runtime_error("unknown format '" + format + "'");
    }
    man.write(manifest_name(out));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PUlasso: penalized maximum likelihood for presence-only data"};
    app.require_subcommand(1);

    FitOptions fit_opt, cv_opt;
    int cv_k = 5;

    auto* fit = app.add_subcommand("fit", "fit a regularization path");
    fit_opt.add_common(fit);

    auto* cv = app.add_subcommand("cv", "cross-validate the path");
    cv_opt.add_common(cv);
    cv->add_option("--k", cv_k, "number of folds")->check(CLI::Range(2, 1000000));

    auto* predict = app.add_subcommand("predict", "score new samples from a fitted path");
    std::string pr_model, pr_manifest, pr_x, pr_out = "pulasso";
    std::optional<double> pr_lambda;
    std::optional<int> pr_index;
    bool pr_strict = false;
    predict->add_option("--model", pr_model, "fitted .path.csv")->required();
    predict->add_option("--manifest", pr_manifest, "model manifest (default: sibling)");
    predict->add_option("--x", pr_x, "new design matrix")->required();
    predict->add_option("--lambda", pr_lambda, "lambda to score at (default: last)");
    predict->add_option("--index", pr_index, "path index to score at");
    predict->add_flag("--strict", pr_strict, "error when --lambda is not on the path");
    predict->add_option("--out", pr_out, "output file prefix");

    auto* simulate = app.add_subcommand("simulate", "synthetic experiments");
    simulate->require_subcommand(1);
    auto* mse = simulate->add_subcommand("mse", "l2-error scaling experiment");
    Index mse_p = 100;
    std::vector<Index> mse_s{2, 5, 10}, mse_n{500, 1000, 2000, 4000};
    int mse_reps = 20, mse_jobs = 1;
    std::uint64_t mse_seed = 0;
    std::vector<std::string> mse_cs;
    std::string mse_out = "pulasso";
    mse->add_option("--p", mse_p, "feature count")->check(CLI::PositiveNumber);
    mse->add_option("--s", mse_s, "sparsity grid")->delimiter(',');
    mse->add_option("--n", mse_n, "sample-size grid")->delimiter(',');
    mse->add_option("--reps", mse_reps, "replicates per cell")->check(CLI::PositiveNumber);
    mse->add_option("--cs", mse_cs, "lambda constants as s=c entries")->delimiter(',');
    mse->add_option("--seed", mse_seed, "root RNG seed");
    mse->add_option("--jobs", mse_jobs, "worker threads")->check(CLI::PositiveNumber);
    mse->add_option("--out", mse_out, "output file prefix");

    auto* classify = simulate->add_subcommand("classify", "classification comparison");
    SimConfig cl_cfg;
    int cl_reps = 20, cl_cvk = 10, cl_nlambda = 50, cl_jobs = 1;
    Index cl_ntest = 1000;
    double cl_ratio = 0.05;
    std::string cl_scheme = "logistic", cl_out = "pulasso";
    classify->add_option("--p", cl_cfg.p)->check(CLI::PositiveNumber);
    classify->add_option("--s", cl_cfg.s)->check(CLI::PositiveNumber);
    classify->add_option("--d", cl_cfg.d);
    classify->add_option("--rho", cl_cfg.rho)->check(CLI::Range(0.0, 0.999));
    classify->add_option("--nl", cl_cfg.n_labeled)->check(CLI::PositiveNumber);
    classify->add_option("--nu", cl_cfg.n_unlabeled)->check(CLI::PositiveNumber);
    classify->add_option("--scheme", cl_scheme)
        ->check(CLI::IsMember({"logistic", "misspecified"}));
    classify->add_option("--reps", cl_reps)->check(CLI::PositiveNumber);
    classify->add_option("--ntest", cl_ntest)->check(CLI::PositiveNumber);
    classify->add_option("--cvk", cl_cvk)->check(CLI::Range(2, 1000));
    classify->add_option("--nlambda", cl_nlambda)->check(CLI::PositiveNumber);
    classify->add_option("--lambda-min-ratio", cl_ratio);
    classify->add_option("--seed", cl_cfg.seed);
    classify->add_option("--jobs", cl_jobs)->check(CLI::PositiveNumber);
    classify->add_option("--out", cl_out);

    auto* evaluate = app.add_subcommand("evaluate", "PU-aware evaluation");
    evaluate->require_subcommand(1);
    auto* auc = evaluate->add_subcommand("auc", "adjusted ROC / AUC");
    std::string auc_scores, auc_z, auc_out = "pulasso";
    double auc_pi = 0.0;
    auc->add_option("--scores", auc_scores)->required();
    auc->add_option("--z", auc_z)->required();
    auc->add_option("--pi", auc_pi, "prevalence in [0,1)")->required()
        ->check(CLI::Range(0.0, std::nextafter(1.0, 0.0)));
    auc->add_option("--out", auc_out);

    auto* metrics = evaluate->add_subcommand("metrics", "misclassification and F1");
    std::string met_pred, met_truth, met_out = "pulasso";
    metrics->add_option("--pred", met_pred)->required();
    metrics->add_option("--truth", met_truth)->required();
    metrics->add_option("--out", met_out);

    auto* stability = evaluate->add_subcommand("stability", "selection stability summary");
    std::string st_sel, st_out = "pulasso";
    stability->add_option("--selections", st_sel)->required();
    stability->add_option("--out", st_out);

    auto* ingest = app.add_subcommand("ingest", "convert inputs to model-ready matrices");
    std::string in_x, in_format = "dense", in_ref, in_out = "pulasso";
    bool in_binary = false;
    ingest->add_option("--x", in_x)->required();
    ingest->add_option("--format", in_format)
        ->check(CLI::IsMember({"dense", "matrixmarket", "categorical"}));
    ingest->add_option("--reference", in_ref, "reference-level row (categorical format)");
    ingest->add_flag("--binary", in_binary, "assert 0/1 values (matrixmarket format)");
    ingest->add_option("--out", in_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*fit) return cmd_fit(fit_opt);
        if (*cv) return cmd_cv(cv_opt, cv_k);
        if (*predict) {
            if (pr_manifest.empty()) {
                pr_manifest = pr_model;
                const std::string suffix = ".path.csv";
                if (pr_manifest.size() > suffix.size() &&
                    pr_manifest.substr(pr_manifest.size() - suffix.size()) == suffix)
                    pr_manifest =
                        pr_manifest.substr(0, pr_manifest.size() - suffix.size()) + ".manifest.json";
            }
            return cmd_predict(pr_model, pr_manifest, pr_x, pr_lambda, pr_index, pr_strict, pr_out);
        }
        if (*mse) return cmd_simulate_mse(mse_p, mse_s, mse_n, mse_reps, mse_cs, mse_seed,
                                          mse_jobs, mse_out);
        if (*classify) {
            cl_cfg.scheme = cl_scheme == "logistic" ? Scheme::logistic : Scheme::misspecified;
            return cmd_simulate_classify(cl_cfg, cl_reps, cl_ntest, cl_cvk, cl_nlambda, cl_ratio,
                                         cl_jobs, cl_out);
        }
        if (*auc) return cmd_evaluate_auc(auc_scores, auc_z, auc_pi, auc_out);
        if (*metrics) return cmd_evaluate_metrics(met_pred, met_truth, met_out);
        if (*stability) return cmd_evaluate_stability(st_sel, st_out);
        if (*ingest) return cmd_ingest(in_x, in_format, in_ref, in_binary, in_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
