#include "dbp/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "dbp/errors.hpp"
#include "dbp/gradcheck_suite.hpp"
#include "dbp/io.hpp"
#include "dbp/pipeline.hpp"

namespace dbp::cli {

namespace {

std::string default_checkpoint() {
    const char* dir = std::getenv(kCheckpointDirEnv);
    if (dir == nullptr || *dir == '\0') return "model.ckpt";
    return (std::filesystem::path(dir) / "model.ckpt").string();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"DBPnet point cloud upsampling", "dbpnet"};
    app.require_subcommand(1, 1);

    // gen-data
    std::string kind = "sphere", gen_out, sparse_out, sampling = "random";
    std::size_t gen_n = 4096, sparse_n = 0;
    std::uint64_t gen_seed = 1;
    auto* gen = app.add_subcommand("gen-data", "Sample a synthetic surface");
    gen->add_option("--kind", kind, "sphere | torus | plane");
    gen->add_option("--n", gen_n, "Number of points")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed);
    gen->add_option("--out", gen_out, "Dense output .xyz")->required();
    gen->add_option("--sparse-out", sparse_out, "Optional sparse subset .xyz");
    gen->add_option("--sparse-n", sparse_n, "Size of the sparse subset");
    gen->add_option("--sampling", sampling, "random | fps");

    // train
    std::string config_path, train_out, log_out;
    std::vector<std::string> overrides;
    auto* tr = app.add_subcommand("train", "Train a model");
    tr->add_option("--config", config_path, "key = value config file");
    tr->add_option("--set", overrides, "key=value override (repeatable)");
    tr->add_option("--out", train_out, "Checkpoint path");
    tr->add_option("--log", log_out, "CSV loss log path");

    // upsample
    std::string up_in, up_ckpt, up_out;
    double factor = 0.0;
    auto* up = app.add_subcommand("upsample", "Upsample a point cloud");
    up->add_option("--in", up_in)->required();
    up->add_option("--ckpt", up_ckpt);
    up->add_option("--factor", factor)->required()->check(CLI::PositiveNumber);
    up->add_option("--out", up_out)->required();

    // eval
    std::string pred, target, surface, name;
    bool header = false;
    auto* ev = app.add_subcommand("eval", "Print a CSV metrics row");
    ev->add_option("--pred", pred)->required();
    ev->add_option("--target", target)->required();
    ev->add_option("--surface", surface, "sphere:r | torus:R,r | plane | mesh:file.ply")->required();
    ev->add_option("--name", name, "Row label (default: prediction file name)");
    ev->add_flag("--header", header, "Print the CSV header first");

    // grad-check
    std::uint64_t gc_seed = 7;
    auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient audit");
    gc->add_option("--seed", gc_seed);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error[E_USAGE]: " << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) {
            const auto sample = gen_surface_cloud(parse_surface_kind(kind), gen_n, gen_seed);
            write_xyz(sample.cloud, gen_out);
            if (!sparse_out.empty()) {
                if (sparse_n == 0 || sparse_n > gen_n)
                    throw ContractError("--sparse-n must be in [1, --n]");
                PointCloud sparse = sample.cloud;
                if (sampling == "random")
                    sparse = random_subsample(sample.cloud, sparse_n, gen_seed + 1);
                else if (sampling == "fps")
                    sparse = select(sample.cloud, farthest_point_sample(sample.cloud, sparse_n));
                else
                    throw ConfigError("unknown --sampling '" + sampling + "' (expected random or fps)");
                write_xyz(sparse, sparse_out);
            }
        } else if (tr->parsed()) {
            TrainConfig cfg;
            if (!config_path.empty()) cfg = load_train_config(config_path);
            for (const auto& kv : overrides) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
                apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
            }
            if (!train_out.empty()) cfg.checkpoint_path = train_out;
            if (cfg.checkpoint_path.empty()) cfg.checkpoint_path = default_checkpoint();
            if (!log_out.empty()) cfg.log_path = log_out;
            const auto result = train(cfg);
            const auto& last = result.log.back();
            out << "trained " << last.step << " steps, loss " << last.loss << ", val_cd " << last.val_cd << "\n";
        } else if (up->parsed()) {
            if (up_ckpt.empty()) up_ckpt = default_checkpoint();
            const auto cloud = read_point_cloud(up_in);
            const auto ckpt = load_checkpoint(up_ckpt);
            write_xyz(upsample_cloud(cloud, factor, ckpt.params), up_out);
        } else if (ev->parsed()) {
            const auto q = read_point_cloud(pred);
            const auto t = read_point_cloud(target);
            const auto s = parse_surface_spec(surface);
            if (name.empty()) name = std::filesystem::path(pred).filename().string();
            if (header) out << MetricsReport::csv_header() << "\n";
            out << evaluate(q, t, s).csv_row(name) << "\n";
        } else if (gc->parsed()) {
            bool ok = true;
            for (const auto& e : run_grad_check_suite(gc_seed)) {
                const bool pass = e.max_rel_error <= kGradCheckTolerance;
                ok = ok && pass;
                char buf[160];
                std::snprintf(buf, sizeof buf, "%-28s %.3e %s (worst: input %zu, entry %zu)\n", e.name.c_str(),
                              e.max_rel_error, pass ? "ok" : "FAIL", e.worst_input, e.worst_index);
                out << buf;
            }
            if (!ok) {
                err << "error[E_GRADCHECK]: relative error above " << kGradCheckTolerance << "\n";
                return 1;
            }
        }
    } catch (const Error& e) {
        err << "error[" << e.code() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error[E_INTERNAL]: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace dbp::cli
