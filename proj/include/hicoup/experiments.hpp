#ifndef HICOUP_EXPERIMENTS_HPP
#define HICOUP_EXPERIMENTS_HPP

#include "hicoup/bem.hpp"
#include "hicoup/cluster.hpp"
#include "hicoup/coupling.hpp"
#include "hicoup/dense.hpp"
#include "hicoup/dual_basis.hpp"
#include "hicoup/harith.hpp"
#include "hicoup/hmatrix.hpp"
#include "hicoup/mesh.hpp"
#include "hicoup/probe.hpp"
#include "hicoup/solver.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#ifndef HICOUP_BUILD_ID
#define HICOUP_BUILD_ID "unknown"
#endif

namespace hicoup {

inline constexpr int kCsvVersion = 1;
inline constexpr int kMaxExperimentLevel = 4;  // BEM blocks are assembled densely

struct RunConfig {
    std::string command;
    std::vector<int> levels{3};
    CouplingKind kind = CouplingKind::jn;
    std::vector<int> ranks{1, 2, 4, 8, 16};
    double eta = 2.0;
    int leaf_size = 25;
    double tol = 1e-3;
    std::uint64_t seed = kNormSeed;
    std::filesystem::path out = "out";
    bool dump_mesh = false;
    bool dump_blocks = false;
    bool dump_ranks = false;
    bool dump_operator = false;
    bool with_unpreconditioned = false;

    int level() const { return levels.front(); }
};

inline void validate(const RunConfig& cfg) {
    static const std::set<std::string> commands{"invert", "lu", "precond", "probe", "verify"};
    if (!commands.count(cfg.command)) throw std::invalid_argument("unknown command '" + cfg.command + "'");
    if (cfg.levels.empty()) throw std::invalid_argument("at least one level is required");
    for (int l : cfg.levels) {
        if (l < 0) throw std::invalid_argument("level must be non-negative");
        if (l > kMaxExperimentLevel)
            throw std::invalid_argument("level " + std::to_string(l) + " exceeds the supported maximum " +
                                        std::to_string(kMaxExperimentLevel));
    }
    if (cfg.ranks.empty()) throw std::invalid_argument("at least one rank is required");
    for (int r : cfg.ranks)
        if (r < 1) throw std::invalid_argument("ranks must be >= 1");
    if (!(cfg.eta > 0.0)) throw std::invalid_argument("eta must be positive");
    if (cfg.leaf_size < 1) throw std::invalid_argument("leaf size must be >= 1");
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (cfg.command == "verify" && cfg.level() > 2)
        throw std::invalid_argument("verify runs dense oracles and needs level <= 2");
}

// -------------------------------------------------------------------------------------
// CSV output
// -------------------------------------------------------------------------------------

/// First line of every CSV: "# hicoup <name> v<version>".
inline std::string csv_banner(const std::string& name) {
    return "# hicoup " + name + " v" + std::to_string(kCsvVersion);
}

inline std::string csv_double(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

/// Commas and newlines removed so a message fits in one CSV field.
inline std::string csv_text(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& file, const std::string& name, const std::vector<std::string>& columns)
        : os_(file) {
        if (!os_) throw std::runtime_error("cannot open " + file.string());
        os_ << csv_banner(name) << '\n';
        for (std::size_t k = 0; k < columns.size(); ++k) os_ << (k ? "," : "") << columns[k];
        os_ << '\n';
    }
    void row(const std::vector<std::string>& fields) {
        for (std::size_t k = 0; k < fields.size(); ++k) os_ << (k ? "," : "") << fields[k];
        os_ << '\n';
        os_.flush();
    }

private:
    std::ofstream os_;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void write_meta(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out);
    std::ofstream os(cfg.out / "meta.txt");
    auto join = [](const std::vector<int>& v) {
        std::string s;
        for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
        return s;
    };
    os << "build_id=" << HICOUP_BUILD_ID << '\n'
       << "command=" << cfg.command << '\n'
       << "levels=" << join(cfg.levels) << '\n'
       << "kind=" << to_string(cfg.kind) << '\n'
       << "ranks=" << join(cfg.ranks) << '\n'
       << "eta=" << csv_double(cfg.eta) << '\n'
       << "leaf=" << cfg.leaf_size << '\n'
       << "tol=" << csv_double(cfg.tol) << '\n'
       << "seed=" << cfg.seed << '\n'
       << "coefficient=identity\n"
       << "with_unpreconditioned=" << cfg.with_unpreconditioned << '\n';
}

/// Gnuplot script for the CSVs of the run.
inline void write_plot_script(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out);
    std::ofstream os(cfg.out / "plot.gp");
    os << "# gnuplot plot.gp (run inside the output directory)\n"
       << "set datafile separator ','\n"
       << "set terminal pngcairo size 1200,500\n";
    if (cfg.command == "invert" || cfg.command == "lu") {
        const std::string file = cfg.command + ".csv";
        os << "set output '" << cfg.command << ".png'\n"
           << "set multiplot layout 1,2\n"
           << "set logscale y\nset xlabel 'block rank r'\nset ylabel 'error'\n"
           << "plot '" << file << "' every ::2 using 1:2 with linespoints title '"
           << (cfg.command == "invert" ? "inverse" : "LU") << "'";
        if (cfg.command == "invert") os << ", '' every ::2 using 1:3 with linespoints title 'LU'";
        os << "\nunset logscale y\nset ylabel 'memory (MB)'\n"
           << "plot '" << file << "' every ::2 using 1:($" << (cfg.command == "invert" ? 4 : 3)
           << "/1048576) with linespoints title 'memory'\n"
           << "unset multiplot\n";
    } else if (cfg.command == "precond") {
        os << "set output 'precond.png'\nset logscale y\nset xlabel 'iteration'\nset ylabel 'relative residual'\n"
           << "files = system('ls history_*.csv')\n"
           << "plot for [f in files] f every ::2 using 1:2 with lines title f\n";
    } else if (cfg.command == "probe") {
        os << "set output 'probe.png'\nset xlabel 'level'\nset ylabel 'normalized ratio'\n"
           << "plot 'probe.csv' every ::2 using 1:7 with linespoints title 'ratio'\n";
    } else {
        os << "# verify produces no plottable data\n";
    }
}

/// Shared setup: mesh, coupling system, joint cluster and block trees.
struct ExperimentSetup {
    std::shared_ptr<const Mesh> mesh;
    CouplingSystem sys;
    std::unique_ptr<ClusterTree> tree;
    std::unique_ptr<BlockClusterTree> bt;
    double assembly_seconds = 0.0;
};

inline ExperimentSetup make_setup(const RunConfig& cfg, int level) {
    ExperimentSetup s;
    const auto t0 = std::chrono::steady_clock::now();
    s.mesh = std::make_shared<const Mesh>(build_cube_mesh(level));
    s.sys = assemble_coupling(cfg.kind, s.mesh);
    s.assembly_seconds = seconds_since(t0);
    s.tree = std::make_unique<ClusterTree>(build_cluster_tree(dof_table(*s.mesh), cfg.leaf_size));
    s.bt = std::make_unique<BlockClusterTree>(build_block_tree(*s.tree, cfg.eta));
    return s;
}

inline void write_dumps(const RunConfig& cfg, const ExperimentSetup& s) {
    if (cfg.dump_mesh) dump_mesh(*s.mesh, cfg.out / "mesh");
    if (cfg.dump_blocks) dump_blocks(*s.bt, cfg.out / "blocks.csv");
    if (cfg.dump_operator) {
        if (s.mesh->level > 3) throw std::invalid_argument("--dump-operator is limited to level <= 3");
        dump_operator(s.sys, cfg.out / "operator.csv", true);
    }
}

// -------------------------------------------------------------------------------------
// invert / lu
// -------------------------------------------------------------------------------------

struct RankRow {
    int rank = 0;
    double err_inv = 0.0;   // ||I - B B_H||_2 (invert only)
    double err_lu = 0.0;    // ||I - B (L U)^{-1}||_2
    std::size_t mem_bytes = 0;
    std::size_t far_entries = 0;
    int max_rank = 0;
    std::string status = "ok";
    double wall_seconds = 0.0;
};

inline std::vector<RankRow> run_rank_sweep(const RunConfig& cfg, bool with_inverse) {
    validate(cfg);
    std::filesystem::create_directories(cfg.out);
    const ExperimentSetup s = make_setup(cfg, cfg.level());
    write_dumps(cfg, s);
    const CouplingSystem& sys = s.sys;
    CompressConfig cc;
    const HMatrix b = compress([&sys](int i, int j) { return sys.entry(i, j, true); }, *s.bt, cc);
    const MatVec bm = [&sys](const Vector& x) { return sys.apply_stabilized(x); };
    const MatVec bmt = [&sys](const Vector& x) { return sys.apply_stabilized_transpose(x); };

    std::vector<RankRow> rows;
    for (int r : cfg.ranks) {
        RankRow row;
        row.rank = r;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const Truncation t{r, 0.0};
            if (with_inverse) {
                const HMatrix inv = hinvert(b, t);
                row.err_inv = inverse_error(bm, bmt, inv, *s.bt).value;
                row.mem_bytes = inv.memory_bytes();
                row.far_entries = inv.far_entries();
                row.max_rank = inv.max_rank();
                if (cfg.dump_ranks) dump_ranks(inv, cfg.out / ("ranks_inv_r" + std::to_string(r) + ".csv"));
            }
            const HLU lu(b, t);
            row.err_lu = lu_error(bm, bmt, lu, *s.tree).value;
            if (!with_inverse) {
                row.mem_bytes = lu.memory_bytes();
                row.max_rank = lu.max_rank();
            } else {
                row.max_rank = std::max(row.max_rank, lu.max_rank());
            }
            if (cfg.dump_ranks && !with_inverse)
                dump_ranks(lu.factors(), cfg.out / ("ranks_lu_r" + std::to_string(r) + ".csv"));
        } catch (const std::exception& e) {
            row.status = "error: " + csv_text(e.what());
        }
        row.wall_seconds = seconds_since(t0);
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<RankRow> cmd_invert(const RunConfig& cfg) {
    auto rows = run_rank_sweep(cfg, true);
    CsvWriter csv(cfg.out / "invert.csv", "invert",
                  {"rank", "err_inv", "err_lu", "mem_bytes", "far_entries", "max_rank", "status", "wall_seconds"});
    for (const auto& r : rows)
        csv.row({std::to_string(r.rank), csv_double(r.err_inv), csv_double(r.err_lu), std::to_string(r.mem_bytes),
                 std::to_string(r.far_entries), std::to_string(r.max_rank), r.status, csv_double(r.wall_seconds)});
    write_meta(cfg);
    write_plot_script(cfg);
    return rows;
}

inline std::vector<RankRow> cmd_lu(const RunConfig& cfg) {
    auto rows = run_rank_sweep(cfg, false);
    CsvWriter csv(cfg.out / "lu.csv", "lu", {"rank", "err_lu", "mem_bytes", "max_rank", "status", "wall_seconds"});
    for (const auto& r : rows)
        csv.row({std::to_string(r.rank), csv_double(r.err_lu), std::to_string(r.mem_bytes),
                 std::to_string(r.max_rank), r.status, csv_double(r.wall_seconds)});
    write_meta(cfg);
    write_plot_script(cfg);
    return rows;
}

// -------------------------------------------------------------------------------------
// precond
// -------------------------------------------------------------------------------------

/// Data of the preconditioner experiment: f = 1, u0 = x_1 on Gamma, phi0 = 0.
inline CouplingData precond_experiment_data(const Mesh& mesh) {
    CouplingData d = zero_data(mesh);
    d.f.setOnes();
    for (int k = 0; k < mesh.num_trace(); ++k) d.u0[k] = mesh.vertices[mesh.trace_to_volume[k]][0];
    return d;
}

struct PrecondRow {
    int level = 0;
    double h = 0.0;
    int fem_dofs = 0;
    int bem_dofs = 0;
    int rank = 0;
    int iters_noP = -1;
    bool converged_noP = false;
    int iters_P = -1;
    bool converged_P = false;
    std::string status = "ok";
    double t_solve_noP = 0.0;
    double t_solve_P = 0.0;
    double t_assembleP = 0.0;
};

inline std::vector<PrecondRow> cmd_precond(const RunConfig& cfg) {
    validate(cfg);
    std::filesystem::create_directories(cfg.out);
    std::vector<std::string> cols{"level", "h", "fem_dofs", "bem_dofs", "rank"};
    if (cfg.with_unpreconditioned) cols.insert(cols.end(), {"iters_noP", "converged_noP"});
    cols.insert(cols.end(), {"iters_P", "converged_P", "status"});
    if (cfg.with_unpreconditioned) cols.push_back("t_solve_noP");
    cols.insert(cols.end(), {"t_solve_P", "t_assembleP"});
    CsvWriter csv(cfg.out / "precond.csv", "precond", cols);

    auto write_history = [&](const std::string& tag, const std::vector<double>& hist) {
        CsvWriter h(cfg.out / ("history_" + tag + ".csv"), "history", {"iter", "relres"});
        for (std::size_t k = 0; k < hist.size(); ++k) h.row({std::to_string(k), csv_double(hist[k])});
    };

    std::vector<PrecondRow> rows;
    for (int level : cfg.levels) {
        const ExperimentSetup s = make_setup(cfg, level);
        if (level == cfg.levels.front()) write_dumps(cfg, s);
        const CouplingSystem& sys = s.sys;
        const Vector b = sys.stabilized_rhs(assemble_rhs(sys, precond_experiment_data(*s.mesh)));
        const MatVec apply = [&sys](const Vector& x) { return sys.apply_stabilized(x); };
        const GmresConfig gc{cfg.tol, 20000};
        const std::string lv = "L" + std::to_string(level);

        int iters_noP = -1;
        bool conv_noP = false;
        double t_noP = 0.0;
        if (cfg.with_unpreconditioned) {
            const auto t0 = std::chrono::steady_clock::now();
            const GmresResult r = gmres(apply, b, gc);
            t_noP = seconds_since(t0);
            iters_noP = r.iterations;
            conv_noP = r.converged;
            write_history(lv + "_noP", r.history);
        }
        for (int rank : cfg.ranks) {
            PrecondRow row;
            row.level = level;
            row.h = s.mesh->h();
            row.fem_dofs = sys.n();
            row.bem_dofs = sys.m();
            row.rank = rank;
            row.iters_noP = iters_noP;
            row.converged_noP = conv_noP;
            row.t_solve_noP = t_noP;
            try {
                const BlockDiagPreconditioner p(sys, PrecondConfig{rank, cfg.eta, cfg.leaf_size});
                row.t_assembleP = p.setup_seconds();
                const auto t0 = std::chrono::steady_clock::now();
                const GmresResult r = gmres(apply, b, gc, [&p](const Vector& x) { return p.apply(x); });
                row.t_solve_P = seconds_since(t0);
                row.iters_P = r.iterations;
                row.converged_P = r.converged;
                if (!r.converged) row.status = "not converged";
                write_history(lv + "_r" + std::to_string(rank), r.history);
            } catch (const std::exception& e) {
                row.status = "error: " + csv_text(e.what());
            }
            std::vector<std::string> f{std::to_string(row.level), csv_double(row.h), std::to_string(row.fem_dofs),
                                       std::to_string(row.bem_dofs), std::to_string(row.rank)};
            if (cfg.with_unpreconditioned)
                f.insert(f.end(), {std::to_string(row.iters_noP), std::to_string(int(row.converged_noP))});
            f.insert(f.end(), {std::to_string(row.iters_P), std::to_string(int(row.converged_P)), row.status});
            if (cfg.with_unpreconditioned) f.push_back(csv_double(row.t_solve_noP));
            f.insert(f.end(), {csv_double(row.t_solve_P), csv_double(row.t_assembleP)});
            csv.row(f);
            rows.push_back(row);
        }
    }
    write_meta(cfg);
    write_plot_script(cfg);
    return rows;
}

// -------------------------------------------------------------------------------------
// probe
// -------------------------------------------------------------------------------------

/// Probe run on the fixed regression geometry; the mesh-ratio precondition is reported,
/// not enforced, because the coarse levels of the sweep violate it.
inline ProbeReport probe_level(CouplingKind kind, int level) {
    auto mesh = std::make_shared<const Mesh>(build_cube_mesh(level));
    const CouplingSystem sys = assemble_coupling(kind, mesh);
    ProbeConfig pc;
    pc.enforce_mesh_ratio = false;
    return run_probe(sys, corner_bump_data(*mesh), pc);
}

inline std::vector<ProbeReport> cmd_probe(const RunConfig& cfg) {
    validate(cfg);
    std::filesystem::create_directories(cfg.out);
    CsvWriter csv(cfg.out / "probe.csv", "probe",
                  {"level", "kind", "R", "eps", "lhs", "rhs", "normalized_ratio", "mesh_ratio_ok", "tube_width",
                   "skipped_points", "wall_seconds"});
    std::vector<ProbeReport> reps;
    for (int level : cfg.levels) {
        const auto t0 = std::chrono::steady_clock::now();
        const ProbeReport r = probe_level(cfg.kind, level);
        csv.row({std::to_string(level), to_string(cfg.kind), csv_double(r.R), csv_double(r.eps), csv_double(r.lhs),
                 csv_double(r.rhs), csv_double(r.normalized_ratio), std::to_string(int(r.mesh_ratio_ok)),
                 csv_double(r.tube_width), std::to_string(r.skipped_points), csv_double(seconds_since(t0))});
        reps.push_back(r);
    }
    write_meta(cfg);
    write_plot_script(cfg);
    return reps;
}

// -------------------------------------------------------------------------------------
// verify
// -------------------------------------------------------------------------------------

struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
};

struct VerifyReport {
    std::vector<Check> checks;
    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }
    std::vector<std::string> failed() const {
        std::vector<std::string> f;
        for (const auto& c : checks)
            if (!c.passed) f.push_back(c.name);
        return f;
    }
};

/// Hook to corrupt an assembled system before the checks run (fault injection in tests).
using SystemMutator = std::function<void(CouplingSystem&)>;

/// Largest |sigma_{r+1} - ||A - T_r(A)||_2| / sigma_1 over random matrices.
inline double eckart_young_defect(int trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dim(2, 24);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int k = 0; k < trials; ++k) {
        const int p = dim(rng), q = dim(rng);
        DenseMatrix a(p, q);
        for (Eigen::Index j = 0; j < q; ++j)
            for (Eigen::Index i = 0; i < p; ++i) a(i, j) = normal(rng);
        const int r = std::uniform_int_distribution<int>(0, std::min(p, q) - 1)(rng);
        const Vector s = singular_values(a);
        const LowRank t = truncate_dense(a, Truncation{r, 0.0});
        const double err = singular_values(a - t.dense())[0];
        worst = std::max(worst, std::abs(err - s[r]) / s[0]);
        // the factored path must agree: split a = X Y^T with an inflated inner dimension
        LowRank lr(a, DenseMatrix::Identity(q, q));
        const LowRank t2 = truncate(lr, Truncation{r, 0.0});
        const double err2 = singular_values(a - t2.dense())[0];
        worst = std::max(worst, std::abs(err2 - s[r]) / s[0]);
    }
    return worst;
}

/// Every index pair covered by exactly one leaf block.
inline bool partition_complete(const BlockClusterTree& bt) {
    const int n = bt.rows->nodes[0].size(), m = bt.cols->nodes[0].size();
    std::vector<unsigned char> hit(static_cast<std::size_t>(n) * m, 0);
    for (const auto& b : bt.blocks) {
        if (b.kind == BlockKind::inner) continue;
        const ClusterNode& r = bt.row_cluster(b);
        const ClusterNode& c = bt.col_cluster(b);
        for (int i = r.begin; i < r.end; ++i)
            for (int j = c.begin; j < c.end; ++j)
                if (++hit[static_cast<std::size_t>(i) * m + j] > 1) return false;
    }
    for (unsigned char h : hit)
        if (h != 1) return false;
    return true;
}

/// Points x +- delta n at panel centroids, for continuity of the single-layer potential.
inline double single_layer_jump(const Mesh& mesh, const Vector& phi, int probes, double delta) {
    double worst = 0.0;
    const int stride = std::max(1, mesh.num_boundary_tris() / probes);
    QuadratureConfig q;
    q.potential_max_depth = 10;
    q.potential_order = 8;
    for (int k = 0; k < probes; ++k) {
        const Triangle t = mesh.triangle((k * stride) % mesh.num_boundary_tris());
        const Vec3 c = t.centroid();
        const PotentialResult pr =
            eval_single_layer(mesh, {Vec3(c - delta * t.normal), Vec3(c + delta * t.normal)}, phi, false, q);
        worst = std::max(worst, std::abs(pr.value[0] - pr.value[1]) / std::abs(pr.value[0]));
    }
    return worst;
}

inline VerifyReport run_verify(int level, std::uint64_t seed = kNormSeed, const SystemMutator& mutate = nullptr) {
    if (level > 2) throw std::invalid_argument("verify runs dense oracles and needs level <= 2");
    VerifyReport rep;
    auto add = [&rep](std::string name, double value, double threshold, bool passed) {
        rep.checks.push_back({std::move(name), value, threshold, passed});
    };
    auto mesh = std::make_shared<const Mesh>(build_cube_mesh(level));

    // mesh sanity
    double vol = 0.0;
    for (int t = 0; t < mesh->num_tets(); ++t) vol += mesh->tet_volume(t);
    add("mesh volume equals 1", std::abs(vol - 1.0), 1e-12, std::abs(vol - 1.0) <= 1e-12);

    std::vector<CouplingSystem> systems;
    for (CouplingKind k : {CouplingKind::bmc, CouplingKind::sym, CouplingKind::jn}) {
        systems.push_back(assemble_coupling(k, mesh));
        if (mutate) mutate(systems.back());
    }
    const CouplingSystem& sym = systems[1];

    // operator identities
    const double vnorm = singular_values(sym.V)[0];
    const double asym = singular_values(sym.V - sym.V.transpose())[0] / vnorm;
    add("V symmetric", asym, 1e-12, asym <= 1e-12);
    const double vmin = Eigen::SelfAdjointEigenSolver<DenseMatrix>(0.5 * (sym.V + sym.V.transpose()),
                                                                   Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .minCoeff();
    add("V positive definite", vmin, 0.0, vmin > 0.0);
    const double wnorm = singular_values(sym.W)[0];
    const double w1 = (sym.W * Vector::Ones(sym.W.cols())).norm() / wnorm;
    add("W annihilates constants", w1, 1e-8, w1 <= 1e-8);
    const Vector k1raw = sym.K * Vector::Ones(mesh->num_trace());
    double kdef = 0.0;
    for (int t = 0; t < sym.m(); ++t) {
        const double a = mesh->triangle(t).area;
        kdef = std::max(kdef, std::abs(k1raw[t] / a + 0.5));
    }
    add("K applied to 1 equals -1/2", kdef, 1e-3, kdef <= 1e-3);

    // Gauss identity with plain quadrature
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.2, 0.8);
        std::vector<Vec3> pts;
        for (int i = 0; i < 10; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
        QuadratureConfig q;
        q.potential_order = 10;
        q.potential_max_depth = 8;
        q.far_tol = 1e-12;
        const PotentialResult pr = eval_double_layer(*mesh, pts, Vector::Ones(mesh->num_trace()), false, q, false);
        const double g = (pr.value.array() + 1.0).abs().maxCoeff();
        add("Gauss identity", g, 1e-6, g <= 1e-6);
    }
    {
        const double j = single_layer_jump(*mesh, Vector::Ones(mesh->num_boundary_tris()), 5, 1e-4);
        add("single-layer potential continuous across Gamma", j, 1e-3, j <= 1e-3);
    }

    // dual basis and representation formula
    const DualBasis dual(mesh);
    {
        double worst = 0.0;
        for (int i = 0; i < dual.size(); ++i) {
            Vector e = Vector::Zero(dual.size());
            e[i] = 1.0;
            worst = std::max(worst, (dual.functional(dual.apply(e)) - e).cwiseAbs().maxCoeff());
        }
        add("dual basis biorthogonal", worst, 1e-12, worst <= 1e-12);
    }
    for (const auto& s : systems) {
        const double e = check_representation_formula(s, dual, 20, seed);
        add("representation formula (" + to_string(s.kind) + ")", e, 1e-10, e <= 1e-10);
    }

    // H-matrix structure and truncation
    {
        const double ey = eckart_young_defect(200, seed);
        add("Eckart-Young truncation error", ey, 1e-10, ey <= 1e-10);
        const ClusterTree tree = build_cluster_tree(dof_table(*mesh), 25);
        const BlockClusterTree bt = build_block_tree(tree, 2.0);
        const bool ok = partition_complete(bt);
        add("block partition complete", ok ? 0.0 : 1.0, 0.0, ok);
    }
    return rep;
}

inline VerifyReport cmd_verify(const RunConfig& cfg) {
    validate(cfg);
    std::filesystem::create_directories(cfg.out);
    const VerifyReport rep = run_verify(cfg.level(), cfg.seed);
    CsvWriter csv(cfg.out / "verify.csv", "verify", {"check", "value", "threshold", "passed"});
    for (const auto& c : rep.checks)
        csv.row({csv_text(c.name), csv_double(c.value), csv_double(c.threshold), std::to_string(int(c.passed))});
    write_meta(cfg);
    write_plot_script(cfg);
    return rep;
}

}  // namespace hicoup

#endif
