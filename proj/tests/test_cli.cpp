#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "sinai/cli.hpp"

using namespace sinai;

namespace {

const std::string tables = SINAI_TABLE_DIR;

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run_cli(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string line_after(const std::string& text, const std::string& prefix)
{
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(prefix, 0) == 0)
            return line.substr(prefix.size());
    return {};
}

} // namespace

TEST(Cli, CheckHorizonFinite)
{
    const auto r = run({"check-horizon", "--table", tables + "/hex_2.2.json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = read_csv_table(r.out, "horizon");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][0], "true");
    EXPECT_EQ(rows[1][4], "none");
    EXPECT_FALSE(line_after(r.out, "# spec_hash: ").empty());
    EXPECT_EQ(line_after(r.out, "# seed: "), "1");
    EXPECT_EQ(line_after(r.out, "# tool: "), std::string("sinai ") + tool_version);
}

TEST(Cli, CheckHorizonCorridorWitness)
{
    const auto r = run({"check-horizon", "--table", tables + "/hex_2.35.json", "--format", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    const auto& row = j["tables"][0]["rows"][0];
    EXPECT_FALSE(row["finite"].get<bool>());
    EXPECT_GT(row["witness_width"].get<double>(), 0.0);
    EXPECT_EQ(j["seed"], 1);
}

TEST(Cli, SrbBoundFromFlags)
{
    const auto r = run({"srb-bound", "--tau-min", "0.15", "--kappa-min", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = read_csv_table(r.out, "srb_bound");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_GT(std::stod(rows[1][2]), 0.36);
    EXPECT_EQ(line_after(r.out, "# spec_hash: "), "none");
}

TEST(Cli, ReportIsByteIdenticalAcrossThreadCounts)
{
    std::string first;
    for (const char* t : {"1", "2", "8"}) {
        const auto r = run({"report", "--table", tables + "/hex_2.2.json", "--n-max", "6", "--seed", "7", "--threads", t});
        ASSERT_EQ(r.code, 0) << r.err;
        if (first.empty())
            first = r.out;
        else
            EXPECT_EQ(r.out, first) << "threads=" << t;
    }
    EXPECT_EQ(line_after(first, "# seed: "), "7");
}

TEST(Cli, EmptyResultIsHeaderOnly)
{
    const auto r = run({"graze-scan", "--table", tables + "/hex_2.2.json", "--n-max", "4", "--threshold", "1e-6"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = read_csv_table(r.out, "grazing_orbits");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"period", "itinerary", "length", "grazing_margin"}));
}

TEST(Cli, CensusRoundTripsThroughCsv)
{
    const auto r = run({"orbits", "--table", tables + "/hex_2.2.json", "--n", "3", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const Billiard b(build_table(HexagonalFamily{2.2}));
    const OrbitEnumerator en(b);
    const auto rows = read_csv_table(r.out, "orbits");
    std::size_t k = 1;
    for (std::size_t n : {3u, 4u}) {
        const auto c = en.census(n);
        for (const auto& o : c.orbits) {
            ASSERT_LT(k, rows.size());
            EXPECT_EQ(parse_itinerary(rows[k][1]), o.itinerary);
            EXPECT_EQ(std::stod(rows[k][3]), o.length);
            ++k;
        }
    }
    EXPECT_EQ(k, rows.size());
    const auto summary = read_csv_table(r.out, "census");
    EXPECT_EQ(summary[1][2], "120");
}

TEST(Cli, Hex215ReportCarriesSparseRecurrenceVerdict)
{
    const auto r = run({"report", "--table", tables + "/hex_2.15.json", "--n-max", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = read_csv_table(r.out, "sparse_recurrence");
    ASSERT_GE(rows.size(), 2u);
    EXPECT_EQ(rows[1][0], "paper");
    EXPECT_EQ(rows[1][5], "true");
}

TEST(Cli, ConfigFileRun)
{
    const auto dir = std::filesystem::temp_directory_path();
    const auto cfg = (dir / "sinai_cli_config.json").string();
    const auto out = (dir / "sinai_cli_out.csv").string();
    write_text(cfg, R"({"table": {"family": "square", "R": 0.25, "R_prime": 0.4},
                        "run": {"command": "sparse-recurrence", "mode": "paper", "output": ")" + out + R"("}})");
    const auto r = run({"run", "--config", cfg});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream f(out);
    const std::string text((std::istreambuf_iterator<char>(f)), {});
    const auto rows = read_csv_table(text, "sparse_recurrence");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][5], "true");
    EXPECT_LT(std::stod(rows[1][1]), 1e-3);
}

TEST(Cli, ExitCodes)
{
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"nonsense"}).code, 2);
    EXPECT_EQ(run({"check-horizon"}).code, 2);
    EXPECT_EQ(run({"check-horizon", "--table", "/nonexistent.json"}).code, 2);
    EXPECT_EQ(run({"srb-bound", "--tau-min", "-1", "--kappa-min", "1"}).code, 2);
    EXPECT_EQ(run({"orbits", "--table", tables + "/hex_2.2.json", "--potential", "bogus"}).code, 2);
    EXPECT_EQ(run({"sparse-recurrence", "--table", tables + "/hex_2.2.json", "--potential", "tau:1"}).code, 2);
    // a capped census is a numerical failure that still writes partial rows
    const auto r = run({"orbits", "--table", tables + "/hex_2.2.json", "--n", "6", "--max-itineraries", "5"});
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(read_csv_table(r.out, "census")[1][6], "true");
    EXPECT_EQ(run({"--version"}).code, 0);
}
