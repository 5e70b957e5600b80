#include "sdlab/commands.hpp"
#include "sdlab/config.hpp"
#include "sdlab/csv.hpp"
#include "sdlab/error.hpp"
#include "sdlab/lambda_tuning.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

using namespace sdlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "sdlab");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "sdlab_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int spawn(const std::string& args) {
    const std::string cmd = std::string(SDLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t column(const CsvTable& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == name) return i;
    ADD_FAILURE() << "missing column " << name;
    return 0;
}

const std::vector<std::string> kTinyProbe = {
    "--classes", "3", "--dim", "5", "--train_per_class", "30", "--test_per_class", "10",
    "--epochs", "20"};

}  // namespace

TEST(Cli, ListsSubcommands) {
    const auto names = cli::subcommand_names();
    for (const char* n : {"ridge-sweep", "logit-figure1", "gram-table", "probe-run", "probe-sweep",
                          "xi-star", "lambda-compare"})
        EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
    EXPECT_THROW(cli::default_config("nope"), InvalidInput);
    EXPECT_EQ(invoke({"--help"}).code, 0);
    EXPECT_EQ(invoke({"--version"}).code, 0);
}

TEST(Cli, RidgeSweepMatchesLibrary) {
    const fs::path dir = fresh_dir("ridge");
    const Outcome o = invoke({"ridge-sweep", "--out_dir", dir.string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const CsvTable t = read_csv_file((dir / "ridge_sweep_gamma_0.25.csv").string());
    ASSERT_EQ(t.rows.size(), 10u);
    const auto ref = figure0_sweep(0.25);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(parse_double(t.rows[i][column(t, "lambda")]), ref[i].lambda);
        EXPECT_EQ(parse_double(t.rows[i][column(t, "e_reg")]), ref[i].e_reg);
        EXPECT_EQ(parse_double(t.rows[i][column(t, "e_sd")]), ref[i].e_sd);
        EXPECT_EQ(parse_double(t.rows[i][column(t, "xi_star")]), ref[i].xi_star);
    }
    const auto run = nlohmann::json::parse(read_text_file((dir / "ridge_sweep_gamma_0.25.csv.run.json").string()));
    EXPECT_EQ(run["subcommand"], "ridge-sweep");
    EXPECT_EQ(run["config"]["gamma"], "0.25");
}

TEST(Cli, RidgeSweepOneFilePerGammaAndDeterministic) {
    const fs::path a = fresh_dir("gamma_a"), b = fresh_dir("gamma_b");
    ASSERT_EQ(invoke({"ridge-sweep", "--gamma", "0.125", "--gamma", "0.5", "--out_dir", a.string()}).code, 0);
    ASSERT_EQ(invoke({"ridge-sweep", "--gamma", "0.125,0.5", "--out_dir", b.string()}).code, 0);
    std::size_t csvs = 0;
    for (const auto& e : fs::directory_iterator(a)) csvs += e.path().extension() == ".csv";
    EXPECT_EQ(csvs, 2u);
    for (const char* f : {"ridge_sweep_gamma_0.125.csv", "ridge_sweep_gamma_0.5.csv"})
        EXPECT_EQ(read_text_file((a / f).string()), read_text_file((b / f).string())) << f;
}

TEST(Cli, CustomDesignAndLambdaGrid) {
    const fs::path dir = fresh_dir("custom");
    const Outcome o = invoke({"ridge-sweep", "--design", "custom", "--sigma", "1,0.5", "--s",
                              "0.7071067811865476,0.7071067811865476", "--lambda", "0.5,2",
                              "--gamma", "1", "--out_dir", dir.string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const CsvTable t = read_csv_file((dir / "ridge_sweep_gamma_1.csv").string());
    ASSERT_EQ(t.rows.size(), 2u);
    const double ref = e_reg(theorem5_design(), NoiseSpec{1.0}, 2.0);
    EXPECT_NEAR(parse_double(t.rows[1][column(t, "e_reg")]), ref, 1e-14 * ref);
    EXPECT_EQ(invoke({"ridge-sweep", "--design", "custom", "--sigma", "0.5,1", "--s", "1,0",
                      "--out_dir", dir.string()}).code, 1);
}

TEST(Cli, LogitFigureRows) {
    const fs::path dir = fresh_dir("logit");
    const Outcome o = invoke({"logit-figure1", "--r", "0.2", "--out_dir", dir.string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const CsvTable t = read_csv_file((dir / "logit_figure1_r_0.2.csv").string());
    ASSERT_EQ(t.rows.size(), 99u);
    for (const auto& row : t.rows) {
        EXPECT_NEAR(parse_double(row[column(t, "bound_lo")]), 0.423, 1e-3);
        EXPECT_NEAR(parse_double(row[column(t, "bound_hi")]), 0.475, 1e-3);
        EXPECT_EQ(row[column(t, "status")], "ok");
    }
    auto row_at = [&](double p) {
        for (const auto& row : t.rows)
            if (std::abs(parse_double(row[0]) - p) < 1e-9) return row;
        ADD_FAILURE() << "no row for p = " << p;
        return t.rows.front();
    };
    EXPECT_EQ(parse_double(row_at(0.01)[column(t, "teacher_acc")]), 1.0);
    const auto last = row_at(0.49);
    EXPECT_NEAR(parse_double(last[column(t, "teacher_acc")]), 0.51, 1e-12);
    EXPECT_NEAR(parse_double(last[column(t, "student_acc")]), 0.51, 1e-12);
    const auto inside = row_at(0.45);
    EXPECT_NEAR(parse_double(inside[column(t, "teacher_acc")]), 0.55, 1e-12);
    EXPECT_EQ(parse_double(inside[column(t, "student_acc")]), 1.0);
}

TEST(Cli, GramTableJson) {
    const fs::path dir = fresh_dir("gram");
    const Outcome o = invoke({"gram-table", "--n", "150", "--format", "json", "--out_dir", dir.string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const auto j = nlohmann::json::parse(read_text_file((dir / "gram_table.json").string()));
    ASSERT_EQ(j["rows"].size(), 8u);
    EXPECT_EQ(j["columns"].size(), 4u);
    EXPECT_EQ(j["run"]["subcommand"], "gram-table");
    for (const auto& row : j["rows"]) {
        ASSERT_TRUE(row["value"].is_number());
        EXPECT_TRUE(row["model"].is_string());
        EXPECT_GT(row["value"].get<double>(), 0.0);
        EXPECT_LT(row["value"].get<double>(), 1.0);
    }
}

TEST(Cli, GramTableCsvRows) {
    const fs::path dir = fresh_dir("gram_csv");
    ASSERT_EQ(invoke({"gram-table", "--n", "100", "--dist", "bernoulli", "--p", "0.3",
                      "--lambda_hat", "0.72", "--out_dir", dir.string()}).code, 0);
    const CsvTable t = read_csv_file((dir / "gram_table.csv").string());
    EXPECT_EQ(t.rows.size(), 8u);
    EXPECT_EQ(invoke({"gram-table", "--dist", "cauchy", "--out_dir", dir.string()}).code, 1);
}

TEST(Cli, ProbeSweepRowCount) {
    const fs::path dir = fresh_dir("probe");
    std::vector<std::string> args = {"probe-sweep", "--xi", "0,0.25,0.5,0.75,1,1.25,1.5,2",
                                     "--out_dir", dir.string()};
    args.insert(args.end(), kTinyProbe.begin(), kTinyProbe.end());
    const Outcome o = invoke(args);
    ASSERT_EQ(o.code, 0) << o.err;
    const CsvTable t = read_csv_file((dir / "probe_sweep.csv").string());
    ASSERT_EQ(t.rows.size(), 8u);
    EXPECT_EQ(parse_double(t.rows[0][column(t, "improvement")]), 0.0);
    const fs::path again = fresh_dir("probe_again");
    args[4] = again.string();
    ASSERT_EQ(invoke(args).code, 0);
    EXPECT_EQ(read_text_file((dir / "probe_sweep.csv").string()),
              read_text_file((again / "probe_sweep.csv").string()));
}

TEST(Cli, ProbeRunFromFeatureFile) {
    const fs::path dir = fresh_dir("probe_file");
    std::ostringstream csv;
    csv << "f0,f1,label\n";
    for (int i = 0; i < 60; ++i) {
        const int y = i % 3;
        csv << (y == 0 ? 2.0 : -1.0) + 0.01 * i << "," << (y == 1 ? 2.0 : -1.0) - 0.01 * i << ","
            << y << "\n";
    }
    write_text_file((dir / "feat.csv").string(), csv.str());
    const Outcome o = invoke({"probe-run", "--dataset", (dir / "feat.csv").string(), "--epochs",
                              "30", "--out_dir", dir.string()});
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_EQ(read_csv_file((dir / "probe_run.csv").string()).rows.size(), 1u);
    EXPECT_EQ(invoke({"probe-run", "--dataset", (dir / "missing.csv").string(), "--out_dir",
                      dir.string()}).code, 2);
}

TEST(Cli, SingleValueModes) {
    const Outcome xs = invoke({"xi-star", "--gamma", "0.5", "--lambda", "0.3"});
    ASSERT_EQ(xs.code, 0) << xs.err;
    EXPECT_EQ(parse_double(trim(xs.out)), xi_star(figure0_design(), NoiseSpec{0.25}, 0.3));
    const Outcome lc = invoke({"lambda-compare"});
    ASSERT_EQ(lc.code, 0) << lc.err;
    std::istringstream in(lc.out);
    double reg = 0.0, sd = 0.0;
    in >> reg >> sd;
    EXPECT_GT(reg, sd);
    const Outcome js = invoke({"xi-star", "--format", "json"});
    ASSERT_EQ(js.code, 0);
    EXPECT_TRUE(nlohmann::json::parse(js.out).is_object());
    EXPECT_EQ(invoke({"lambda-compare", "--gamma", "0"}).code, 3);
    EXPECT_EQ(invoke({"lambda-compare", "--gamma", "0", "--allow_boundary", "true"}).code, 0);
}

TEST(Cli, ConfigRoundTrip) {
    const fs::path dir = fresh_dir("config");
    const Outcome printed = invoke({"gram-table", "--n", "321", "--q", "0.7", "--print-config"});
    ASSERT_EQ(printed.code, 0);
    write_text_file((dir / "run.cfg").string(), printed.out);
    const Outcome again = invoke({"gram-table", "--config", (dir / "run.cfg").string(), "--print-config"});
    EXPECT_EQ(again.out, printed.out);
    const Outcome over =
        invoke({"gram-table", "--config", (dir / "run.cfg").string(), "--n", "55", "--print-config"});
    RunConfig cfg = cli::default_config("gram-table");
    cfg.load_text(over.out);
    EXPECT_EQ(cfg.integer("n"), 55);
    EXPECT_EQ(cfg.num("q"), 0.7);
    write_text_file((dir / "bad.cfg").string(), "unknown_key = 3\n");
    EXPECT_EQ(invoke({"gram-table", "--config", (dir / "bad.cfg").string()}).code, 1);
    EXPECT_EQ(invoke({"gram-table", "--config", (dir / "absent.cfg").string()}).code, 2);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(invoke({"ridge-sweep", "--bogus", "1"}).code, 1);
    EXPECT_EQ(invoke({"no-such-command"}).code, 1);
    EXPECT_EQ(invoke({"gram-table", "--n", "abc"}).code, 1);
    EXPECT_EQ(invoke({"gram-table", "--n", "10", "--n", "20"}).code, 1);
    EXPECT_EQ(invoke({"ridge-sweep", "--gamma", "-1"}).code, 1);
    const fs::path dir = fresh_dir("blocked");
    write_text_file((dir / "file").string(), "x");
    const Outcome o = invoke({"ridge-sweep", "--out_dir", (dir / "file" / "sub").string()});
    EXPECT_EQ(o.code, 2);
    EXPECT_FALSE(o.err.empty());
}

TEST(Cli, ProcessExitCodes) {
    const fs::path dir = fresh_dir("process");
    EXPECT_EQ(spawn("--version"), 0);
    EXPECT_EQ(spawn("ridge-sweep --out_dir " + dir.string()), 0);
    EXPECT_TRUE(fs::exists(dir / "ridge_sweep_gamma_0.25.csv"));
    EXPECT_EQ(spawn("ridge-sweep --bogus 1"), 1);
    write_text_file((dir / "file").string(), "x");
    EXPECT_EQ(spawn("ridge-sweep --out_dir " + (dir / "file" / "sub").string()), 2);
}

TEST(Csv, QuotingRoundTrip) {
    const std::vector<std::string> fields = {"plain", "a,b", "say \"hi\"", "two\nlines", ""};
    const CsvTable t = parse_csv(csv_line({"h1", "h2", "h3", "h4", "h5"}) + "\n" + csv_line(fields) + "\n");
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0], fields);
    EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678, 0.0})
        EXPECT_EQ(parse_double(format_double(v)), v);
    EXPECT_THROW(parse_double("1.5x"), InvalidInput);
}

TEST(Config, Parsing) {
    EXPECT_EQ(trim("  a b \t"), "a b");
    EXPECT_EQ(split_list(" 1, 2 ,3"), (std::vector<std::string>{"1", "2", "3"}));
    RunConfig cfg("demo", {{"alpha", "1", "a", false}, {"grid", "1,2", "g", true}});
    cfg.load_text("# comment\nalpha = 2.5  # trailing\n\ngrid = 4,5,6\n");
    EXPECT_EQ(cfg.num("alpha"), 2.5);
    EXPECT_EQ(cfg.nums("grid"), (std::vector<double>{4, 5, 6}));
    EXPECT_THROW(cfg.set("beta", "1"), InvalidInput);
    EXPECT_THROW(cfg.load_text("alpha 3\n"), InvalidInput);
    cfg.set("alpha", "x");
    EXPECT_THROW(cfg.num("alpha"), InvalidInput);
}
