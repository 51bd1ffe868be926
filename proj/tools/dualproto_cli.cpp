// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end.
//
// Exit codes: 0 success, 1 verification failure or internal error,
// 2 configuration, 3 data, 4 training divergence, 5 protocol or codec.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dualproto/config.hpp"
#include "dualproto/errors.hpp"
#include "dualproto/evaluation.hpp"
#include "dualproto/verify/suite.hpp"

namespace fs = std::filesystem;
using namespace dualproto;

namespace {

enum Exit : int { kOk = 0, kFailed = 1, kConfig = 2, kData = 3, kDiverged = 4, kProtocol = 5 };

struct CommonFlags {
    std::string profile = "paper";
    std::string config_file;
    std::vector<std::string> overrides;
    std::string variant;
    std::vector<std::uint64_t> seeds;
    std::string output_dir;
    double alpha = -1.0;
    long long workers = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--profile", f.profile, "Base profile: paper or desk")->capture_default_str();
    cmd->add_option("-c,--config", f.config_file, "JSON config file");
    cmd->add_option("--set", f.overrides, "Override a config key, e.g. --set training.rounds=5");
    cmd->add_option("--variant", f.variant, "Pipeline variant");
    cmd->add_option("--seeds", f.seeds, "Run seeds (replaces the config list)");
    cmd->add_option("-o,--output", f.output_dir, "Output directory");
    cmd->add_option("--alpha", f.alpha, "Dirichlet concentration for the partition");
    cmd->add_option("-j,--workers", f.workers, "Worker threads (0: all hardware threads)");
}

RunConfig resolve(const CommonFlags& f) {
    ConfigSources src;
    src.profile = f.profile;
    if (!f.config_file.empty()) src.file = f.config_file;
    src.overrides = f.overrides;
    if (!f.variant.empty()) src.overrides.push_back("variant=\"" + f.variant + "\"");
    if (!f.output_dir.empty()) src.overrides.push_back("output_dir=" + nlohmann::json(f.output_dir).dump());
    if (f.alpha >= 0.0) src.overrides.push_back("partition.alpha=" + nlohmann::json(f.alpha).dump());
    if (f.workers >= 0) src.overrides.push_back("workers=" + std::to_string(f.workers));
    if (!f.seeds.empty()) src.overrides.push_back("seeds=" + nlohmann::json(f.seeds).dump());
    return parse_config(src);
}

void report(const ExperimentResult& r) {
    const Summary& s = r.final_accuracy;
    std::printf("%-20s final average accuracy %.2f%% +- %.2f (n=%zu, min %.2f, max %.2f)\n",
                to_string(r.variant).c_str(), 100.0 * s.mean, 100.0 * s.stddev, s.n, 100.0 * s.min, 100.0 * s.max);
}

void write_summary(const fs::path& dir, std::span<const ExperimentResult> results) {
    fs::create_directories(dir);
    std::ofstream f(dir / "summary.csv");
    write_summary_csv(results, f);
}

int cmd_run(const CommonFlags& flags) {
    const RunConfig cfg = resolve(flags);
    const fs::path dir = cfg.output_dir;
    const ExperimentResult r = run_experiment(cfg, cfg.variant, cfg.seeds);
    write_experiment(dir, cfg, r);
    const ExperimentResult one[] = {r};
    write_summary(dir, one);
    report(r);
    std::printf("wrote %s\n", (dir / "summary.csv").string().c_str());
    return kOk;
}

int cmd_ablate(const CommonFlags& flags) {
    const RunConfig cfg = resolve(flags);
    const fs::path dir = cfg.output_dir;
    std::vector<ExperimentResult> results;
    for (Variant v : all_variants()) {
        results.push_back(run_experiment(cfg, v, cfg.seeds));
        write_experiment(dir, cfg, results.back());
        report(results.back());
    }
    write_summary(dir, results);
    std::printf("wrote %s\n", (dir / "summary.csv").string().c_str());
    return kOk;
}

template <typename T, typename Apply>
int sweep(const CommonFlags& flags, const std::vector<std::string>& variant_names, const char* key,
          const std::vector<T>& (*points)(const RunConfig&), Apply apply) {
    const RunConfig base = resolve(flags);
    std::vector<Variant> variants;
    for (const auto& n : variant_names) variants.push_back(parse_variant(n));
    if (variants.empty()) variants.push_back(base.variant);

    const fs::path dir = fs::path(base.output_dir) / (std::string("sweep_") + key);
    fs::create_directories(dir);
    std::ofstream csv(dir / "sweep.csv");
    csv << key << ",variant,seeds,mean_final_accuracy,std_final_accuracy,min_final_accuracy,max_final_accuracy\n";
    for (const T& point : points(base)) {
        RunConfig cfg = base;
        apply(cfg, point);
        cfg.validate();
        const std::string tag = std::string(key) + "_" + nlohmann::json(point).dump();
        for (Variant v : variants) {
            const ExperimentResult r = run_experiment(cfg, v, cfg.seeds);
            write_experiment(dir / tag, cfg, r);
            const Summary& s = r.final_accuracy;
            char line[256];
            std::snprintf(line, sizeof line, "%s,%s,%zu,%.17g,%.17g,%.17g,%.17g\n", nlohmann::json(point).dump().c_str(),
                          to_string(v).c_str(), s.n, s.mean, s.stddev, s.min, s.max);
            csv << line;
            std::printf("%s=%s ", key, nlohmann::json(point).dump().c_str());
            report(r);
        }
    }
    std::printf("wrote %s\n", (dir / "sweep.csv").string().c_str());
    return kOk;
}

const std::vector<double>& alpha_points(const RunConfig& c) { return c.sweep.alphas; }
const std::vector<std::size_t>& epoch_points(const RunConfig& c) { return c.sweep.epochs; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-branch federated prototype learning simulator"};
    app.require_subcommand(1);

    CommonFlags run_flags, ablate_flags, alpha_flags, epoch_flags;
    std::vector<std::string> alpha_variants, epoch_variants;

    auto* run = app.add_subcommand("run", "Run one variant over the configured seeds");
    add_common(run, run_flags);
    auto* ablate = app.add_subcommand("ablate", "Run every pipeline variant");
    add_common(ablate, ablate_flags);
    auto* sweep_alpha = app.add_subcommand("sweep-alpha", "Repeat the run for each alpha in sweep.alphas");
    add_common(sweep_alpha, alpha_flags);
    sweep_alpha->add_option("--variants", alpha_variants, "Variants to compare (default: the config variant)");
    auto* sweep_epochs = app.add_subcommand("sweep-epochs", "Repeat the run for each E in sweep.epochs");
    add_common(sweep_epochs, epoch_flags);
    sweep_epochs->add_option("--variants", epoch_variants, "Variants to compare (default: the config variant)");
    auto* verify = app.add_subcommand("verify", "Run the property and oracle suite");
    bool verify_quick = false;
    verify->add_flag("--quick", verify_quick, "Skip the multi-seed directional comparison");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*run) return cmd_run(run_flags);
        if (*ablate) return cmd_ablate(ablate_flags);
        if (*sweep_alpha) {
            return sweep<double>(alpha_flags, alpha_variants, "alpha", alpha_points,
                                 [](RunConfig& c, double a) { c.partition.alpha = a; });
        }
        if (*sweep_epochs) {
            return sweep<std::size_t>(epoch_flags, epoch_variants, "epochs", epoch_points,
                                      [](RunConfig& c, std::size_t e) { c.training.epochs = e; });
        }
        if (*verify) {
            verify::SuiteOptions opts;
            opts.include_directional = !verify_quick;
            const auto results = verify::run_suite(opts, std::cout);
            return verify::all_passed(results) ? kOk : kFailed;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kConfig;
    } catch (const IngestionError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const TrainingError& e) {
        std::fprintf(stderr, "training diverged: %s\n", e.what());
        return kDiverged;
    } catch (const CodecError& e) {
        std::fprintf(stderr, "codec error: %s\n", e.what());
        return kProtocol;
    } catch (const ProtocolError& e) {
        std::fprintf(stderr, "protocol error: %s\n", e.what());
        return kProtocol;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailed;
    }
    return kOk;
}
