// One PASS/FAIL line per acceptance criterion. The exit status reports whether the run
// completed; criterion failures are printed, not turned into a nonzero exit.
#include "hicoup/experiments.hpp"

#include <cstdio>
#include <sstream>

using namespace hicoup;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
    if (!ok) ++failures;
    std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

/// Coefficient of determination of a least-squares line through (x, y).
double r_squared(const std::vector<double>& x, const std::vector<double>& y, double* slope = nullptr) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (slope) *slope = sxy / sxx;
    return syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
}

std::filesystem::path scratch(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("hicoup_acceptance_" + name);
    std::filesystem::remove_all(p);
    return p;
}

void dof_counts() {
    const int expect[3][2] = {{729, 768}, {4913, 3072}, {35937, 12288}};
    bool ok = true;
    std::string d;
    for (int k = 0; k < 3; ++k) {
        const DofTable t = dof_table(build_cube_mesh(3 + k));
        ok = ok && t.n == expect[k][0] && t.m == expect[k][1];
        d += "L" + std::to_string(3 + k) + "=(" + std::to_string(t.n) + "," + std::to_string(t.m) + ") ";
    }
    report(1, ok, d);
}

void preconditioned_gmres() {
    RunConfig cfg;
    cfg.command = "precond";
    cfg.levels = {3, 4};
    cfg.ranks = {1, 10};
    cfg.with_unpreconditioned = true;
    cfg.out = scratch("precond");
    const auto rows = cmd_precond(cfg);
    auto iters = [&](int level, int rank) {
        for (const auto& r : rows)
            if (r.level == level && r.rank == rank) return r.converged_P ? r.iters_P : 1 << 30;
        return 1 << 30;
    };
    int nop3 = -1;
    for (const auto& r : rows)
        if (r.level == 3) nop3 = r.iters_noP;
    const int a3 = iters(3, 1), a4 = iters(4, 1), b3 = iters(3, 10), b4 = iters(4, 10);
    const bool r1 = a3 <= 5 && a4 <= 7;
    const bool r10 = b3 <= 4 && b4 <= 4;
    const bool growth = a4 - a3 <= 3 && b4 - b3 <= 3;
    const bool nop = nop3 >= 300;
    report(2, r1 && r10 && growth && nop,
           "r=1: " + std::to_string(a3) + "/" + std::to_string(a4) + (r1 ? " ok" : " over bound") +
               "; r=10: " + std::to_string(b3) + "/" + std::to_string(b4) + (r10 ? " ok" : " over bound") +
               "; growth " + (growth ? "ok" : "too large") + "; unpreconditioned L3 " + std::to_string(nop3) +
               (nop ? " ok" : " below 300"));
}

void inverse_decay_and_memory() {
    RunConfig cfg;
    cfg.command = "invert";
    cfg.levels = {3};
    cfg.ranks = {1, 2, 4, 8, 16};
    cfg.out = scratch("invert");
    const auto rows = cmd_invert(cfg);

    std::vector<double> r, logerr, mem;
    bool decreasing = true, statuses = true;
    int lu_better = 0;
    std::string errs;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        statuses = statuses && rows[k].status == "ok";
        if (k > 0 && !(rows[k].err_inv < rows[k - 1].err_inv)) decreasing = false;
        if (rows[k].err_lu <= rows[k].err_inv) ++lu_better;
        r.push_back(rows[k].rank);
        logerr.push_back(std::log(rows[k].err_inv));
        mem.push_back(static_cast<double>(rows[k].mem_bytes));
        errs += fmt(rows[k].err_inv) + (k + 1 < rows.size() ? "," : "");
    }
    const double ratio = rows[4].err_inv / rows[1].err_inv;
    double slope = 0.0;
    const double r2 = r_squared(r, logerr, &slope);
    const bool ok = statuses && decreasing && ratio <= 1e-3 && slope < 0.0 && r2 >= 0.9 && lu_better >= 4;
    report(3, ok,
           "err_inv=[" + errs + "] decreasing=" + (decreasing ? "yes" : "no") + " err16/err2=" + fmt(ratio) +
               " slope=" + fmt(slope) + " R2=" + fmt(r2) + " lu<=inv for " + std::to_string(lu_better) + "/5");

    // far-field storage at a fixed tree against the closed form
    const auto mesh = std::make_shared<const Mesh>(build_cube_mesh(3));
    const ClusterTree tree = build_cluster_tree(dof_table(*mesh), 25);
    const BlockClusterTree bt = build_block_tree(tree, 2.0);
    bool exact = true;
    for (const auto& row : rows) {
        // a leaf may end below r only if the block itself has lower rank
        const std::size_t bound = storage_report(bt, row.rank).far_entries;
        exact = exact && row.far_entries <= bound && row.max_rank <= row.rank;
    }
    std::size_t formula_gap = 0;
    for (int rank : {1, 4, 16}) {
        HMatrix h = HMatrix::structure(bt);
        h.for_each_leaf([rank](HMatrix& l) {
            if (l.kind == HKind::lowrank)
                l.R = LowRank(DenseMatrix::Ones(l.rows(), rank), DenseMatrix::Ones(l.cols(), rank));
        });
        const std::size_t got = h.far_entries(), want = storage_report(bt, rank).far_entries;
        formula_gap += got > want ? got - want : want - got;
    }
    exact = exact && formula_gap == 0;
    const double mr2 = r_squared(r, mem);
    report(4, exact && mr2 >= 0.98,
           std::string("far storage ") + (exact ? "matches" : "differs from") + " sum r(|tau|+|sigma|); memory R2=" +
               fmt(mr2));
}

void verify_checks() {
    const VerifyReport rep = run_verify(2);
    auto find = [&](const std::string& prefix, bool& ok, std::string& d) {
        for (const auto& c : rep.checks)
            if (c.name.rfind(prefix, 0) == 0) {
                ok = ok && c.passed;
                d += c.name + "=" + fmt(c.value) + " ";
            }
    };
    bool rep_ok = true, id_ok = true;
    std::string rep_d, id_d;
    find("representation formula", rep_ok, rep_d);
    report(5, rep_ok, rep_d);
    for (const char* name : {"W annihilates constants", "V positive definite", "Gauss identity",
                             "single-layer potential continuous"})
        find(name, id_ok, id_d);
    report(6, id_ok, id_d);
}

void probe_ratios() {
    bool ok = true;
    std::string d;
    for (CouplingKind kind : {CouplingKind::bmc, CouplingKind::sym, CouplingKind::jn}) {
        double base = 0.0;
        d += to_string(kind) + "=[";
        for (int level = 2; level <= 4; ++level) {
            const ProbeReport r = probe_level(kind, level);
            if (level == 2) base = r.normalized_ratio;
            const double q = r.normalized_ratio / base;
            ok = ok && !r.trivial && base > 0.0 && q <= 3.0 && q >= 1.0 / 3.0;
            d += fmt(r.normalized_ratio) + (level < 4 ? "," : "] ");
        }
    }
    report(7, ok, d);
}

void truncation_invariants() {
    const double defect = eckart_young_defect(1000, kNormSeed);
    const auto mesh = std::make_shared<const Mesh>(build_cube_mesh(2));
    const CouplingSystem sys = assemble_coupling(CouplingKind::jn, mesh);
    const ClusterTree tree = build_cluster_tree(dof_table(*mesh), 25);
    const BlockClusterTree bt = build_block_tree(tree, 2.0);
    const HMatrix b = compress([&sys](int i, int j) { return sys.entry(i, j, true); }, bt);
    int worst_excess = 0;
    for (int r : {1, 2, 4, 8}) {
        const Truncation t{r, 0.0};
        for (const HMatrix& h : {hinvert(b, t), HLU(b, t).factors(), hmul(b, b, t), hadd(b, b, t)})
            worst_excess = std::max(worst_excess, h.max_rank() - r);
    }
    report(8, defect <= 1e-10 && worst_excess <= 0,
           "max Eckart-Young defect=" + fmt(defect) + " rank excess=" + std::to_string(worst_excess));
}

}  // namespace

int main() {
    std::setvbuf(stdout, nullptr, _IONBF, 0);
    try {
        dof_counts();
        preconditioned_gmres();
        inverse_decay_and_memory();
        verify_checks();
        probe_ratios();
        truncation_invariants();
    } catch (const std::exception& e) {
        std::printf("acceptance aborted: %s\n", e.what());
        return 2;
    }
    std::printf("summary: %d of 8 criteria failed\n", failures);
    return 0;
}
