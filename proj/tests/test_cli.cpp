#include "support/fixtures.hpp"

#include <mivs/cli.hpp>
#include <mivs/csv.hpp>

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace mivs;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test
{
protected:
    void SetUp() override
    {
        dir = fs::temp_directory_path() /
              ("mivs_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    int call(std::vector<std::string> args)
    {
        out.str("");
        err.str("");
        return cli::run(args, out, err);
    }

    std::string write_set(const MultipleImputationSet& set, const std::string& name = "data.csv")
    {
        std::ofstream f(path(name));
        f << "imputation_id,subject_id,y";
        for (int j = 0; j < set.p(); ++j) f << ",x" << j + 1;
        f << '\n';
        for (int d = 0; d < set.D(); ++d)
            for (int i = 0; i < set.n(); ++i) {
                f << d + 1 << ",s" << i << ',' << csv::format(set.outcome()[i]);
                for (int j = 0; j < set.p(); ++j) f << ',' << csv::format(set.X(d)(i, j));
                f << '\n';
            }
        return path(name);
    }

    static std::string slurp(const std::string& p)
    {
        std::ifstream f(p);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }

    static json manifest(const std::string& d) { return json::parse(slurp(d + "/manifest.json")); }

    fs::path dir;
    std::ostringstream out, err;
};

fixtures::SetShape shape(int n, int p, int D, std::uint64_t seed)
{
    fixtures::SetShape s;
    s.n = n;
    s.p = p;
    s.D = D;
    s.seed = seed;
    return s;
}

} // namespace

TEST(Sha256, KnownDigest)
{
    const auto p = (fs::temp_directory_path() / "mivs_sha_abc.txt").string();
    {
        std::ofstream f(p, std::ios::binary);
        f << "abc";
    }
    EXPECT_EQ(cli::sha256_file(p), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    fs::remove(p);
}

TEST_F(CliTest, FitHugeLambdaGivesZeros)
{
    const auto data = write_set(fixtures::random_set(shape(40, 4, 2, 1)));
    ASSERT_EQ(call({"fit", data, "--method", "slasso", "--lambda", "1e9", "--out-dir", path("out")}), cli::kExitOk)
        << err.str();
    const auto table = csv::read(path("out/coefficients.csv"));
    ASSERT_EQ(table.rows.size(), 4u);
    EXPECT_EQ(table.header, (std::vector<std::string>{"covariate", "estimate_standardized", "estimate_original", "selected"}));
    for (const auto& row : table.rows) {
        EXPECT_EQ(csv::to_double(row[2], "test"), 0.0);
        EXPECT_EQ(row[3], "0");
    }
    EXPECT_FALSE(fs::exists(path("out/cv_path.csv")));
    const auto m = manifest(path("out"));
    EXPECT_EQ(m["schema_version"], cli::kManifestSchema);
    EXPECT_EQ(m["command"], "fit");
    EXPECT_EQ(m["inputs"][0]["sha256"], cli::sha256_file(data));
    EXPECT_EQ(m["config"]["lambda"], 1e9);
}

TEST_F(CliTest, FitGroupedCvRecordsBothStages)
{
    const auto data = write_set(fixtures::random_set(shape(50, 4, 2, 2)));
    ASSERT_EQ(call({"fit", data, "--method", "galasso", "--cv", "--grid-size", "15", "--out-dir", path("out")}),
              cli::kExitOk)
        << err.str();
    const auto cv = csv::read(path("out/cv_path.csv"));
    int stage1 = 0, stage2 = 0, chosen = 0;
    for (const auto& row : cv.rows) {
        stage1 += row[0] == "1";
        stage2 += row[0] == "2";
        chosen += row[7] == "1";
    }
    EXPECT_EQ(stage1, 15);
    EXPECT_EQ(stage2, 15);
    EXPECT_EQ(chosen, 2);
    const auto coef = csv::read(path("out/coefficients.csv"));
    EXPECT_EQ(coef.header.back(), "estimate_original_imp2");
    const auto m = manifest(path("out"));
    ASSERT_EQ(m["result"]["stages"].size(), 2u);
    EXPECT_EQ(m["result"]["stages"][0]["method"], "glasso");
    // v = ln 8 / ln 100, gamma = ceil(2v / (1 - v)) + 1 = 3.
    EXPECT_EQ(m["result"]["stages"][1]["gamma"], 3.0);
}

TEST_F(CliTest, FitRecordsWeightSchemeAndValidatesFlags)
{
    const auto data = write_set(fixtures::random_set(shape(40, 3, 2, 3)));
    ASSERT_EQ(call({"fit", data, "--method", "senet:w", "--lambda", "0.05", "--alpha", "0.5", "--out-dir", path("w")}),
              cli::kExitOk)
        << err.str();
    EXPECT_EQ(manifest(path("w"))["config"]["weights"], "observed");
    ASSERT_EQ(call({"fit", data, "--method", "senet", "--weights", "observed", "--lambda", "0.05", "--alpha", "0.5",
                    "--out-dir", path("w2")}),
              cli::kExitOk);
    EXPECT_EQ(slurp(path("w/coefficients.csv")), slurp(path("w2/coefficients.csv")));

    EXPECT_EQ(call({"fit", data, "--method", "slasso", "--out-dir", path("x")}), cli::kExitInput);
    EXPECT_EQ(call({"fit", data, "--method", "slasso", "--cv", "--lambda", "1", "--out-dir", path("x")}), cli::kExitInput);
    EXPECT_EQ(call({"fit", data, "--method", "slasso", "--alpha", "0.5", "--lambda", "1", "--out-dir", path("x")}),
              cli::kExitInput);
    EXPECT_EQ(call({"fit", data, "--method", "glasso:w", "--lambda", "1", "--out-dir", path("x")}), cli::kExitInput);
    EXPECT_EQ(call({"fit", path("missing.csv"), "--method", "slasso", "--lambda", "1"}), cli::kExitInput);
    EXPECT_EQ(call({"bogus"}), cli::kExitInput);
}

TEST_F(CliTest, SimulateIsByteIdenticalWithoutRuntimes)
{
    const std::vector<std::string> base{"simulate", "--case", "1", "--methods", "slasso", "--reps", "1",
                                        "--seed", "7", "--imputations", "2", "--grid-size", "20", "--no-runtime"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out-dir", path("a")});
    b.insert(b.end(), {"--out-dir", path("b"), "--threads", "2"});
    ASSERT_EQ(call(a), cli::kExitOk) << err.str();
    const std::string printed = out.str();
    ASSERT_EQ(call(b), cli::kExitOk);
    EXPECT_EQ(out.str(), printed);
    for (const char* f : {"replications.csv", "summary.csv", "failures.csv", "truth.csv"})
        EXPECT_EQ(slurp(path(std::string("a/") + f)), slurp(path(std::string("b/") + f))) << f;
    EXPECT_EQ(csv::read(path("a/replications.csv")).rows.size(), 1u);
    EXPECT_EQ(manifest(path("a"))["config"]["case"]["imputations"], 2);

    EXPECT_EQ(call({"simulate", "--case", "7", "--out-dir", path("c")}), cli::kExitInput);
    EXPECT_EQ(call({"simulate", "--case", "1", "--methods", "lasso", "--out-dir", path("c")}), cli::kExitInput);
}

TEST_F(CliTest, SimulateAcceptsJsonCase)
{
    {
        std::ofstream f(path("case.json"));
        f << R"({"base_case": 1, "name": "tiny", "n": 60, "replications": 1, "imputations": 2})";
    }
    ASSERT_EQ(call({"simulate", "--case", path("case.json"), "--methods", "slasso", "--grid-size", "10", "--out-dir",
                    path("out")}),
              cli::kExitOk)
        << err.str();
    const auto rows = csv::read(path("out/replications.csv")).rows;
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0][0], "tiny");
    EXPECT_EQ(manifest(path("out"))["inputs"][0]["role"], "case_config");
}

TEST_F(CliTest, EvaluateScoresAgainstTruth)
{
    {
        std::ofstream t(path("truth.csv"));
        t << "covariate,beta\n";
        std::ofstream z(path("zeros.csv"));
        z << "covariate,estimate_original\n(intercept),0.3\n";
        std::ofstream w(path("wrong.csv"));
        w << "covariate,estimate\n";
        const double beta[] = {2, 0, 0, 1.5, 0, 0, 1.5, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0};
        for (int j = 0; j < 20; ++j) {
            t << 'x' << j + 1 << ',' << beta[j] << '\n';
            z << 'x' << j + 1 << ",0\n";
            w << 'z' << j + 1 << ",0\n";
        }
    }
    ASSERT_EQ(call({"evaluate", "--estimates", path("truth.csv"), path("zeros.csv"), "--truth", path("truth.csv"),
                    "--out-dir", path("out")}),
              cli::kExitOk)
        << err.str();
    const auto m = csv::read(path("out/metrics.csv"));
    ASSERT_EQ(m.rows.size(), 2u);
    EXPECT_EQ(m.header, (std::vector<std::string>{"estimates", "sens", "spec", "mse_nonnull", "mse_null"}));
    EXPECT_EQ(csv::to_double(m.rows[0][1], ""), 1.0);
    EXPECT_EQ(csv::to_double(m.rows[0][2], ""), 1.0);
    EXPECT_EQ(csv::to_double(m.rows[0][3], ""), 0.0);
    EXPECT_EQ(csv::to_double(m.rows[1][1], ""), 0.0);
    EXPECT_EQ(csv::to_double(m.rows[1][2], ""), 1.0);
    EXPECT_EQ(csv::to_double(m.rows[1][3], ""), 10.5);
    EXPECT_EQ(call({"evaluate", "--estimates", path("wrong.csv"), "--truth", path("truth.csv"), "--out-dir", path("o2")}),
              cli::kExitInput);
}

TEST_F(CliTest, ReplayReproducesOutputsAndDetectsChangedInputs)
{
    const auto data = write_set(fixtures::random_set(shape(50, 4, 2, 4)));
    ASSERT_EQ(call({"fit", data, "--method", "salasso", "--cv", "--grid-size", "12", "--seed", "5", "--out-dir",
                    path("first")}),
              cli::kExitOk)
        << err.str();
    ASSERT_EQ(call({"replay", path("first/manifest.json"), "--out-dir", path("second")}), cli::kExitOk) << err.str();
    for (const char* f : {"coefficients.csv", "cv_path.csv"})
        EXPECT_EQ(slurp(path(std::string("first/") + f)), slurp(path(std::string("second/") + f))) << f;
    EXPECT_EQ(manifest(path("second"))["seed"], 5);

    {
        std::ofstream f(data, std::ios::app);
        f << "\n";
    }
    EXPECT_EQ(call({"replay", path("first/manifest.json"), "--out-dir", path("third")}), cli::kExitInput);
    EXPECT_NE(err.str().find("changed"), std::string::npos);
}
