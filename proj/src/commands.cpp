#include "sdlab/commands.hpp"

#include "sdlab/csv.hpp"
#include "sdlab/error.hpp"
#include "sdlab/feature_io.hpp"
#include "sdlab/kernel_sim.hpp"
#include "sdlab/lambda_tuning.hpp"
#include "sdlab/logit_fixedpoint.hpp"
#include "sdlab/parallel.hpp"
#include "sdlab/probe_sd.hpp"
#include "sdlab/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>

#ifndef SDLAB_VERSION
#define SDLAB_VERSION "0.0.0"
#endif

namespace sdlab::cli {

namespace {

using json = nlohmann::ordered_json;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

struct Context {
    std::ostream& out;
    std::ostream& err;
    int exit_code = 0;
};

struct Command {
    std::string name;
    std::string help;
    std::vector<KeySpec> keys;
    std::function<void(const RunConfig&, Context&)> run;
};

std::vector<KeySpec> with_common(std::vector<KeySpec> keys) {
    keys.push_back({"seed", "0", "64-bit base seed"});
    keys.push_back({"out_dir", ".", "directory for output files"});
    keys.push_back({"format", "csv", "csv or json"});
    return keys;
}

std::vector<KeySpec> design_keys() {
    return {{"design", "figure0", "figure0, theorem5 or custom"},
            {"sigma", "", "custom singular values, descending", true},
            {"s", "", "custom projections <theta*, u_j>", true},
            {"null_mass", "0", "custom null-space mass"},
            {"d", "0", "custom ambient dimension (0 = rank)"}};
}

std::vector<KeySpec> probe_keys(bool sweep) {
    std::vector<KeySpec> k = {
        {"dataset", "synthetic", "'synthetic' or a feature file (CSV or SDFT binary)"},
        {"test_fraction", "0.2", "held-out fraction for feature files"},
        {"superclass", "", "class -> group id list for hierarchical corruption on files", true},
        {"classes", "10", "synthetic: class count"},
        {"dim", "50", "synthetic: feature dimension"},
        {"train_per_class", "500", "synthetic: training samples per class"},
        {"test_per_class", "200", "synthetic: test samples per class"},
        {"separation", "3", "synthetic: norm of each class mean"},
        {"superclass_size", "2", "synthetic: classes per superclass"},
        {"corruption", "random", "random, hierarchical or adversarial"},
        {"level", "0.5", "corruption level in [0, 1]"},
        {"k", "5", "adversarial hard-class count"},
        {"lambda", "0.01", "L2 penalty coefficient"},
        {"epochs", "300", "gradient steps"},
        {"step_size", "1", "initial step; <= 0 selects from the learning-rate grid"},
        {"batch_size", "0", "0 = full batch"},
        {"seeds", "1", "independent repetitions; child seed = mix64(seed, index)"},
    };
    if (sweep)
        k.push_back({"xi", "0,0.5,1,1.5,2", "imitation parameter grid", true});
    else
        k.push_back({"xi", "1", "imitation parameter"});
    return k;
}

SpectralDesign design_from(const RunConfig& cfg) {
    const std::string kind = cfg.str("design");
    if (kind == "figure0") return figure0_design();
    if (kind == "theorem5") return theorem5_design();
    if (kind != "custom") throw InvalidInput("design must be figure0, theorem5 or custom");
    SpectralDesign d;
    d.sigma = cfg.nums("sigma");
    d.s = cfg.nums("s");
    d.null_mass = cfg.num("null_mass");
    const long long dim = cfg.integer("d");
    d.d = dim > 0 ? static_cast<std::size_t>(dim) : d.sigma.size();
    if (d.sigma.empty()) throw InvalidInput("custom design needs sigma values");
    d.validate();
    return d;
}

json run_record(const RunConfig& cfg) {
    json r;
    r["tool"] = "sdlab";
    r["version"] = SDLAB_VERSION;
    r["subcommand"] = cfg.subcommand();
    r["config"] = json::parse(cfg.to_json_text());
    return r;
}

json cell_json(const std::string& cell) {
    try {
        const double v = parse_double(cell);
        if (std::isfinite(v)) return v;
    } catch (const InvalidInput&) {
    }
    return cell;
}

std::filesystem::path prepare_dir(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.str("out_dir"));
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw IoError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

std::string emit(const RunConfig& cfg, const std::string& stem, const Table& t) {
    const std::string format = cfg.str("format");
    const auto dir = prepare_dir(cfg);
    json rec = run_record(cfg);
    if (format == "csv") {
        const std::string path = (dir / (stem + ".csv")).string();
        std::string text = csv_line(t.header);
        for (const auto& row : t.rows) text += csv_line(row);
        write_text_file(path, text);
        rec["file"] = stem + ".csv";
        write_text_file(path + ".run.json", rec.dump(2) + "\n");
        return path;
    }
    if (format == "json") {
        const std::string path = (dir / (stem + ".json")).string();
        json doc;
        doc["run"] = rec;
        doc["columns"] = t.header;
        json rows = json::array();
        for (const auto& row : t.rows) {
            json o;
            for (std::size_t i = 0; i < row.size(); ++i) o[t.header[i]] = cell_json(row[i]);
            rows.push_back(o);
        }
        doc["rows"] = rows;
        write_text_file(path, doc.dump(2) + "\n");
        return path;
    }
    throw InvalidInput("format must be csv or json");
}

void check_format(const RunConfig& cfg) {
    const std::string f = cfg.str("format");
    if (f != "csv" && f != "json") throw InvalidInput("format must be csv or json");
}

// ---------------------------------------------------------------- ridge-sweep

void cmd_ridge_sweep(const RunConfig& cfg, Context&) {
    check_format(cfg);
    const SpectralDesign design = design_from(cfg);
    const std::vector<double> gammas = cfg.nums("gamma");
    const std::vector<double> fixed = cfg.nums("lambda");
    if (gammas.empty()) throw InvalidInput("at least one gamma is required");
    std::vector<Table> tables(gammas.size());
    parallel_for(gammas.size(), [&](std::size_t i) {
        const double g = gammas[i];
        if (!(g > 0.0)) throw InvalidInput("gamma must be positive");
        const auto lambdas = fixed.empty() ? figure0_lambdas(g) : fixed;
        Table t{{"lambda", "e_reg", "e_sd", "xi_star", "e_sd_prime"}, {}};
        for (const auto& r : curve(design, NoiseSpec{g * g}, lambdas))
            t.rows.push_back({format_double(r.lambda), format_double(r.e_reg), format_double(r.e_sd),
                              format_double(r.xi_star), format_double(r.e_sd_prime)});
        tables[i] = std::move(t);
    });
    for (std::size_t i = 0; i < gammas.size(); ++i)
        emit(cfg, "ridge_sweep_gamma_" + format_double(gammas[i]), tables[i]);
}

// -------------------------------------------------------------- logit-figure1

void cmd_logit_figure1(const RunConfig& cfg, Context& ctx) {
    check_format(cfg);
    const std::vector<double> rs = cfg.nums("r");
    const double c = cfg.num("c");
    const long long n = cfg.integer("n");
    const double step = cfg.num("p_step");
    if (rs.empty()) throw InvalidInput("at least one r is required");
    if (n < 1) throw InvalidInput("n must be positive");
    if (!(step > 0.0 && step < 0.5)) throw InvalidInput("p_step must lie in (0, 0.5)");
    if (!(c > 0.0 && c < 1.0)) throw InvalidInput("c must lie in (0, 1)");

    std::vector<double> ps;
    for (int k = 1;; ++k) {
        const double p = k * step;
        if (p >= 0.5 - 1e-12) break;
        ps.push_back(p);
    }
    std::size_t solved = 0;
    std::size_t total = 0;
    for (double r : rs) {
        if (!(r > 0.0)) throw InvalidInput("r must be positive");
        const PInterval bound = thm1_p_interval(r);
        const double lh = (1.0 - c) / (4.0 * r);
        std::vector<std::vector<std::string>> rows(ps.size());
        std::vector<char> ok(ps.size(), 0);
        parallel_for(ps.size(), [&](std::size_t i) {
            const CorruptionSetting s{static_cast<std::size_t>(n), ps[i], c, lh};
            std::string tacc = "nan", sacc = "nan", status = "ok";
            try {
                const TeacherDual td = solve_teacher(s);
                const StudentDual sd = solve_student(s, td);
                tacc = format_double(group_accuracy(teacher_predictions(td, s), s.p));
                sacc = format_double(group_accuracy(student_predictions(sd, td, s), s.p));
                ok[i] = 1;
            } catch (const SolverError&) {
                status = "solver_error";
            } catch (const InconsistentSolution&) {
                status = "inconsistent";
            }
            rows[i] = {format_double(ps[i]), tacc, sacc, format_double(bound.lo),
                       format_double(bound.hi), status};
        });
        for (char o : ok) solved += static_cast<std::size_t>(o);
        total += ps.size();
        emit(cfg, "logit_figure1_r_" + format_double(r),
             Table{{"p", "teacher_acc", "student_acc", "bound_lo", "bound_hi", "status"}, rows});
    }
    if (static_cast<double>(solved) < 0.95 * static_cast<double>(total)) {
        ctx.err << "only " << solved << " of " << total << " rows solved\n";
        ctx.exit_code = 3;
    }
}

// ----------------------------------------------------------------- gram-table

void cmd_gram_table(const RunConfig& cfg, Context&) {
    check_format(cfg);
    GramSpec spec;
    const std::string dist = cfg.str("dist");
    if (dist == "uniform") spec.dist = GramDist::Uniform01;
    else if (dist == "bernoulli") spec.dist = GramDist::Bernoulli;
    else throw InvalidInput("dist must be uniform or bernoulli");
    const long long n = cfg.integer("n");
    if (n < 2) throw InvalidInput("n must be at least 2");
    spec.n = static_cast<std::size_t>(n);
    spec.q = cfg.num("q");
    spec.p = cfg.num("p");
    spec.lambda_hat = cfg.num("lambda_hat");
    spec.c_nominal = GramSpec::nominal_c(spec.dist, spec.q);
    spec.seed = cfg.u64("seed");
    FitOptions opt;
    opt.tol = cfg.num("tol");
    const TableResult res = run_table(spec, opt);
    Table t{{"model", "group", "kind", "value"}, {}};
    for (const auto& r : res.rows) {
        t.rows.push_back({r.model, r.group, "avg", format_double(r.avg_pred)});
        t.rows.push_back({r.model, r.group, "a3", format_double(r.a3_pred)});
    }
    emit(cfg, "gram_table", t);
}

// -------------------------------------------------------------------- probes

CorruptionKind corruption_kind(const std::string& s) {
    if (s == "random") return CorruptionKind::Random;
    if (s == "hierarchical") return CorruptionKind::Hierarchical;
    if (s == "adversarial") return CorruptionKind::Adversarial;
    throw InvalidInput("corruption must be random, hierarchical or adversarial");
}

void cmd_probe(const RunConfig& cfg, Context&, bool sweep) {
    check_format(cfg);
    const std::vector<double> xis = cfg.nums("xi");
    if (xis.empty()) throw InvalidInput("xi grid is empty");
    if (!sweep && xis.size() != 1) throw InvalidInput("probe-run takes a single xi");
    const long long seeds = cfg.integer("seeds");
    if (seeds < 1) throw InvalidInput("seeds must be positive");
    const std::uint64_t base = cfg.u64("seed");
    const std::string dataset = cfg.str("dataset");

    ProbeConfig pc;
    pc.lambda = cfg.num("lambda");
    pc.step_size = cfg.num("step_size");
    const long long epochs = cfg.integer("epochs");
    const long long batch = cfg.integer("batch_size");
    if (epochs < 1) throw InvalidInput("epochs must be at least 1");
    if (batch < 0) throw InvalidInput("batch_size must be nonnegative");
    pc.epochs = static_cast<std::size_t>(epochs);
    pc.batch_size = static_cast<std::size_t>(batch);

    CorruptionSpec cs;
    cs.kind = corruption_kind(cfg.str("corruption"));
    cs.level = cfg.num("level");
    const long long k = cfg.integer("k");
    if (k < 1) throw InvalidInput("k must be positive");
    cs.k = static_cast<std::size_t>(k);

    FeatureDataset file_data;
    const bool synthetic = dataset == "synthetic";
    if (!synthetic) {
        file_data = read_features(dataset);
        const auto sup = cfg.nums("superclass");
        if (!sup.empty()) {
            std::vector<int> m;
            for (double v : sup) m.push_back(static_cast<int>(v));
            file_data.superclass = m;
        }
    }

    std::vector<std::vector<ProbeResult>> results(static_cast<std::size_t>(seeds));
    parallel_for(results.size(), [&](std::size_t s) {
        const std::uint64_t child = mix64(base, s);
        FeatureDataset data;
        if (synthetic) {
            SyntheticSpec ss;
            ss.num_classes = static_cast<int>(cfg.integer("classes"));
            ss.dim = static_cast<std::size_t>(cfg.integer("dim"));
            ss.train_per_class = static_cast<std::size_t>(cfg.integer("train_per_class"));
            ss.test_per_class = static_cast<std::size_t>(cfg.integer("test_per_class"));
            ss.separation = cfg.num("separation");
            ss.superclass_size = static_cast<int>(cfg.integer("superclass_size"));
            ss.seed = child;
            data = synthetic_clusters(ss);
        } else {
            data = file_data;
            random_split(data, cfg.num("test_fraction"), child);
        }
        CorruptionSpec local = cs;
        local.seed = mix64(child, 1);
        ProbeConfig lpc = pc;
        lpc.seed = child;
        results[s] = xi_sweep(data, local, xis, lpc);
    });

    Table t{{"seed_index", "xi", "teacher_test_acc", "student_test_acc", "improvement",
             "teacher_variability", "student_variability"},
            {}};
    for (std::size_t s = 0; s < results.size(); ++s) {
        for (const auto& r : results[s]) {
            double tv = 0.0, sv = 0.0;
            for (const auto& [a, b] : r.per_class_variability) {
                tv += a;
                sv += b;
            }
            const double C = static_cast<double>(r.per_class_variability.size());
            t.rows.push_back({std::to_string(s), format_double(r.xi),
                              format_double(r.teacher_test_acc), format_double(r.student_test_acc),
                              format_double(r.improvement), format_double(tv / C),
                              format_double(sv / C)});
        }
    }
    emit(cfg, sweep ? "probe_sweep" : "probe_run", t);
}

// -------------------------------------------------------- single-value modes

void print_values(const RunConfig& cfg, Context& ctx, const std::vector<std::string>& names,
                  const std::vector<double>& values) {
    check_format(cfg);
    if (cfg.str("format") == "json") {
        json doc;
        doc["run"] = run_record(cfg);
        for (std::size_t i = 0; i < names.size(); ++i) doc[names[i]] = values[i];
        ctx.out << doc.dump() << "\n";
        return;
    }
    for (std::size_t i = 0; i < values.size(); ++i) ctx.out << (i ? " " : "") << format_double(values[i]);
    ctx.out << "\n";
}

void cmd_xi_star(const RunConfig& cfg, Context& ctx) {
    const SpectralDesign design = design_from(cfg);
    const double g = cfg.num("gamma");
    print_values(cfg, ctx, {"xi_star"}, {xi_star(design, NoiseSpec{g * g}, cfg.num("lambda"))});
}

void cmd_lambda_compare(const RunConfig& cfg, Context& ctx) {
    const SpectralDesign design = design_from(cfg);
    const double g = cfg.num("gamma");
    MinimizeOptions opt;
    opt.allow_boundary = cfg.str("allow_boundary") == "true";
    const NoiseSpec noise{g * g};
    const LambdaMinimum reg = minimize_e_reg(design, noise, opt);
    const LambdaMinimum sd = minimize_e_sd(design, noise, opt);
    print_values(cfg, ctx, {"min_e_reg", "min_e_sd"}, {reg.value, sd.value});
}

const std::vector<Command>& commands() {
    static const std::vector<Command> cmds = [] {
        std::vector<Command> c;
        {
            auto keys = design_keys();
            keys.push_back({"gamma", "0.25", "noise level(s); one file per value", true});
            keys.push_back({"lambda", "", "lambda grid (empty: 2^(i-3) gamma^2, i = 1..10)", true});
            c.push_back({"ridge-sweep", "e_reg / e_sd / xi* curves over lambda", with_common(keys),
                         cmd_ridge_sweep});
        }
        c.push_back({"logit-figure1", "teacher/student accuracy across p for each r",
                     with_common({{"r", "0.2,0.3,0.4", "r = (1-c)/(4 lambda_hat) values", true},
                                  {"c", "0.1", "within-class correlation"},
                                  {"n", "5000", "samples per class"},
                                  {"p_step", "0.005", "p grid spacing"}}),
                     cmd_logit_figure1});
        c.push_back({"gram-table", "random Gram simulation vs closed predictions",
                     with_common({{"dist", "uniform", "uniform or bernoulli"},
                                  {"q", "0.8", "Bernoulli success probability"},
                                  {"n", "1000", "samples per class"},
                                  {"p", "0.45", "corruption fraction"},
                                  {"lambda_hat", "0.75", "2 n lambda"},
                                  {"tol", "1e-9", "stationarity tolerance"}}),
                     cmd_gram_table});
        c.push_back({"probe-run", "one teacher/student pair on features", with_common(probe_keys(false)),
                     [](const RunConfig& cfg, Context& ctx) { cmd_probe(cfg, ctx, false); }});
        c.push_back({"probe-sweep", "teacher and one student per xi", with_common(probe_keys(true)),
                     [](const RunConfig& cfg, Context& ctx) { cmd_probe(cfg, ctx, true); }});
        {
            auto keys = design_keys();
            keys.push_back({"gamma", "0.25", "noise level"});
            keys.push_back({"lambda", "1", "regularization"});
            c.push_back({"xi-star", "optimal imitation parameter", with_common(keys), cmd_xi_star});
        }
        {
            auto keys = design_keys();
            keys.push_back({"gamma", "0.25", "noise level"});
            keys.push_back({"allow_boundary", "false", "accept a minimizer on the bracket edge"});
            c.push_back({"lambda-compare", "min over lambda of e_reg and e_sd", with_common(keys),
                         cmd_lambda_compare});
        }
        return c;
    }();
    return cmds;
}

const Command& find_command(const std::string& name) {
    for (const auto& c : commands())
        if (c.name == name) return c;
    throw InvalidInput("unknown subcommand '" + name + "'");
}

}  // namespace

std::vector<std::string> subcommand_names() {
    std::vector<std::string> out;
    for (const auto& c : commands()) out.push_back(c.name);
    return out;
}

RunConfig default_config(const std::string& subcommand) {
    const Command& c = find_command(subcommand);
    return RunConfig(c.name, c.keys);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Self-distillation experiment toolkit"};
    app.set_version_flag("--version", std::string(SDLAB_VERSION));
    app.require_subcommand(1);

    struct Bound {
        const Command* cmd;
        CLI::App* sub;
        std::map<std::string, std::vector<std::string>> values;
        std::string config_path;
        bool print_config = false;
    };
    std::vector<std::unique_ptr<Bound>> bound;
    for (const auto& c : commands()) {
        auto b = std::make_unique<Bound>();
        b->cmd = &c;
        b->sub = app.add_subcommand(c.name, c.help);
        for (const auto& k : c.keys) {
            auto* opt = b->sub->add_option("--" + k.name, b->values[k.name], k.help);
            opt->allow_extra_args(false);
            opt->expected(1);
            opt->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
        }
        b->sub->add_option("--config", b->config_path, "flat key = value file");
        b->sub->add_flag("--print-config", b->print_config, "print resolved configuration and exit");
        bound.push_back(std::move(b));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << SDLAB_VERSION << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    for (const auto& b : bound) {
        if (!b->sub->parsed()) continue;
        Context ctx{out, err};
        try {
            RunConfig cfg(b->cmd->name, b->cmd->keys);
            if (!b->config_path.empty()) cfg.load_file(b->config_path);
            for (const auto& k : b->cmd->keys) {
                const auto& v = b->values[k.name];
                if (v.empty()) continue;
                if (!k.list && v.size() > 1)
                    throw InvalidInput("--" + k.name + " given more than once");
                std::string joined;
                for (std::size_t i = 0; i < v.size(); ++i) joined += (i ? "," : "") + v[i];
                cfg.set(k.name, joined);
            }
            if (b->print_config) {
                out << cfg.to_text();
                return 0;
            }
            b->cmd->run(cfg, ctx);
            return ctx.exit_code;
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
            return exit_code_for(e);
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return 3;
        }
    }
    return 1;
}

}  // namespace sdlab::cli
