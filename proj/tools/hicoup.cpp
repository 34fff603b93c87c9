#include "hicoup/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace hicoup;

namespace {

std::string fmt(double v) { return csv_double(v); }

int run(const RunConfig& cfg) {
    if (cfg.command == "invert") {
        for (const auto& r : cmd_invert(cfg))
            std::cout << "r=" << r.rank << " err_inv=" << fmt(r.err_inv) << " err_lu=" << fmt(r.err_lu)
                      << " mem=" << r.mem_bytes << " " << r.status << '\n';
    } else if (cfg.command == "lu") {
        for (const auto& r : cmd_lu(cfg))
            std::cout << "r=" << r.rank << " err_lu=" << fmt(r.err_lu) << " mem=" << r.mem_bytes << " " << r.status
                      << '\n';
    } else if (cfg.command == "precond") {
        for (const auto& r : cmd_precond(cfg)) {
            std::cout << "level=" << r.level << " dofs=" << r.fem_dofs << "/" << r.bem_dofs << " r=" << r.rank;
            if (cfg.with_unpreconditioned) std::cout << " iters_noP=" << r.iters_noP;
            std::cout << " iters_P=" << r.iters_P << " " << r.status << '\n';
        }
    } else if (cfg.command == "probe") {
        for (const auto& r : cmd_probe(cfg))
            std::cout << "level=" << r.level << " kind=" << to_string(r.kind) << " ratio=" << fmt(r.normalized_ratio)
                      << (r.mesh_ratio_ok ? "" : " (" + r.mesh_ratio_message + ")") << '\n';
    } else {
        const VerifyReport rep = cmd_verify(cfg);
        for (const auto& c : rep.checks)
            std::cout << (c.passed ? "[ok]   " : "[FAIL] ") << c.name << "  " << fmt(c.value) << '\n';
        if (!rep.all_passed()) {
            std::cerr << "failed checks:";
            for (const auto& f : rep.failed()) std::cerr << " '" << f << "'";
            std::cerr << '\n';
            return 1;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"H-matrix experiments for FEM-BEM couplings on the unit cube"};
    RunConfig cfg;
    std::string kind = "jn";
    std::string out = cfg.out.string();
    app.add_option("command", cfg.command, "invert, lu, precond, probe or verify")
        ->required()
        ->check(CLI::IsMember({"invert", "lu", "precond", "probe", "verify"}));
    app.add_option("--level", cfg.levels, "refinement level(s), comma separated")->delimiter(',');
    app.add_option("--kind", kind, "coupling: bmc, sym or jn")->check(CLI::IsMember({"bmc", "sym", "jn"}));
    app.add_option("--ranks", cfg.ranks, "block ranks, comma separated")->delimiter(',');
    app.add_option("--eta", cfg.eta, "admissibility parameter");
    app.add_option("--leaf", cfg.leaf_size, "cluster leaf size");
    app.add_option("--tol", cfg.tol, "GMRES relative residual");
    app.add_option("--seed", cfg.seed, "seed of randomized estimators");
    app.add_option("--out", out, "output directory");
    app.add_flag("--with-unpreconditioned", cfg.with_unpreconditioned, "also run GMRES without preconditioner");
    app.add_flag("--dump-mesh", cfg.dump_mesh, "write the mesh as CSV");
    app.add_flag("--dump-blocks", cfg.dump_blocks, "write the block partition");
    app.add_flag("--dump-ranks", cfg.dump_ranks, "write leaf ranks per block rank");
    app.add_flag("--dump-operator", cfg.dump_operator, "write the stabilized coupling matrix");
    CLI11_PARSE(app, argc, argv);
    cfg.kind = parse_kind(kind);
    cfg.out = out;
    try {
        validate(cfg);
        return run(cfg);
    } catch (const std::exception& e) {
        std::cerr << "hicoup: " << e.what() << '\n';
        return 2;
    }
}
