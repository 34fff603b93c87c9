#include "hicoup/experiments.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <fstream>

using namespace hicoup;

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::vector<std::string> lines;
    for (std::string l; std::getline(is, l);) lines.push_back(l);
    return lines;
}

std::filesystem::path scratch(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("hicoup_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

// drops the wall_seconds column (last field)
std::vector<std::string> without_timing(const std::vector<std::string>& lines) {
    std::vector<std::string> out;
    for (const auto& l : lines) out.push_back(l.substr(0, l.rfind(',')));
    return out;
}

}  // namespace

TEST(Experiments, Validation) {
    RunConfig cfg;
    cfg.command = "lu";
    EXPECT_NO_THROW(validate(cfg));
    cfg.command = "bogus";
    EXPECT_THROW(validate(cfg), std::invalid_argument);
    cfg.command = "invert";
    cfg.levels = {5};
    EXPECT_THROW(validate(cfg), std::invalid_argument);
    cfg.levels = {2};
    cfg.ranks = {0};
    EXPECT_THROW(validate(cfg), std::invalid_argument);
    cfg.ranks = {1};
    cfg.eta = 0.0;
    EXPECT_THROW(validate(cfg), std::invalid_argument);
    cfg.eta = 2.0;
    cfg.command = "verify";
    cfg.levels = {3};
    EXPECT_THROW(validate(cfg), std::invalid_argument);
}

TEST(Experiments, CsvHelpers) {
    EXPECT_EQ(csv_banner("lu"), "# hicoup lu v1");
    EXPECT_EQ(csv_text("a,b\nc"), "a;b;c");
    EXPECT_EQ(csv_double(0.5), "0.5");
}

TEST(Experiments, LuCsvLayoutAndDeterminism) {
    RunConfig cfg;
    cfg.command = "lu";
    cfg.levels = {1};
    cfg.ranks = {1, 2};
    cfg.out = scratch("lu_a");
    const auto rows = cmd_lu(cfg);
    ASSERT_EQ(rows.size(), 2u);
    const auto lines = read_lines(cfg.out / "lu.csv");
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(lines[0], "# hicoup lu v1");
    EXPECT_EQ(lines[1], "rank,err_lu,mem_bytes,max_rank,status,wall_seconds");
    EXPECT_TRUE(std::filesystem::exists(cfg.out / "plot.gp"));
    const auto meta = read_lines(cfg.out / "meta.txt");
    ASSERT_FALSE(meta.empty());
    EXPECT_EQ(meta[0].rfind("build_id=", 0), 0u);

    RunConfig again = cfg;
    again.out = scratch("lu_b");
    cmd_lu(again);
    EXPECT_EQ(without_timing(lines), without_timing(read_lines(again.out / "lu.csv")));
}

TEST(Experiments, InvertCsvHeader) {
    RunConfig cfg;
    cfg.command = "invert";
    cfg.levels = {1};
    cfg.ranks = {2};
    cfg.out = scratch("invert");
    const auto rows = cmd_invert(cfg);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_LE(rows[0].max_rank, 2);
    const auto lines = read_lines(cfg.out / "invert.csv");
    EXPECT_EQ(lines[1], "rank,err_inv,err_lu,mem_bytes,far_entries,max_rank,status,wall_seconds");
}

TEST(Experiments, PrecondCsvColumns) {
    RunConfig cfg;
    cfg.command = "precond";
    cfg.levels = {1};
    cfg.ranks = {1};
    cfg.out = scratch("precond");
    cmd_precond(cfg);
    auto lines = read_lines(cfg.out / "precond.csv");
    EXPECT_EQ(lines[1], "level,h,fem_dofs,bem_dofs,rank,iters_P,converged_P,status,t_solve_P,t_assembleP");
    EXPECT_TRUE(std::filesystem::exists(cfg.out / "history_L1_r1.csv"));

    cfg.with_unpreconditioned = true;
    cfg.out = scratch("precond_noP");
    const auto rows = cmd_precond(cfg);
    lines = read_lines(cfg.out / "precond.csv");
    EXPECT_EQ(lines[1],
              "level,h,fem_dofs,bem_dofs,rank,iters_noP,converged_noP,iters_P,converged_P,status,t_solve_noP,"
              "t_solve_P,t_assembleP");
    EXPECT_TRUE(rows[0].converged_noP);
    EXPECT_TRUE(rows[0].converged_P);
    EXPECT_TRUE(std::filesystem::exists(cfg.out / "history_L1_noP.csv"));
}

TEST(Experiments, ProbeCsvHeader) {
    RunConfig cfg;
    cfg.command = "probe";
    cfg.levels = {1};
    cfg.kind = CouplingKind::bmc;
    cfg.out = scratch("probe");
    cmd_probe(cfg);
    const auto lines = read_lines(cfg.out / "probe.csv");
    EXPECT_EQ(lines[1],
              "level,kind,R,eps,lhs,rhs,normalized_ratio,mesh_ratio_ok,tube_width,skipped_points,wall_seconds");
    EXPECT_EQ(lines.size(), 3u);
}

TEST(Experiments, VerifyPassesOnCoarseMesh) {
    const auto t0 = std::chrono::steady_clock::now();
    const VerifyReport rep = run_verify(1);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << c.name << " value " << c.value;
    EXPECT_TRUE(rep.all_passed());
    EXPECT_LT(seconds_since(t0), 10.0);
}

TEST(Experiments, VerifyDetectsCorruptedOperator) {
    const VerifyReport rep = run_verify(1, kNormSeed, [](CouplingSystem& s) { s.V(0, 1) += 1e-3; });
    EXPECT_FALSE(rep.all_passed());
    const auto failed = rep.failed();
    EXPECT_NE(std::find(failed.begin(), failed.end(), "V symmetric"), failed.end());
}
