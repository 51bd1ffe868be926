// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "dualproto/errors.hpp"
#include "dualproto/parallel.hpp"
#include "dualproto/random.hpp"

namespace dualproto {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

void write_loss_cells(std::ostream& out, const LossBreakdown& b) {
    out << num(b.l_sce) << ',' << num(b.l_dce) << ',' << num(b.l_s) << ',' << num(b.l_d) << ',' << num(b.total)
        << ',' << num(b.margin_m);
}

const char* kLossHeader = "l_sce,l_dce,l_s,l_d,total,margin_m";

LabeledDataset load_dataset(const DatasetConfig& cfg, std::uint64_t run_seed) {
    if (cfg.kind == "csv") return ingest_csv(cfg.csv_path, cfg.label_column);
    return generate_synthetic(cfg.num_classes, cfg.per_class, cfg.input_dim, cfg.separation, cfg.seed + run_seed);
}

const PrototypeSet* evaluation_prototypes(const FederatedClient& client, const ServerState& state) {
    if (client.prototypes() && client.prototypes()->covers_all()) return &*client.prototypes();
    if (state.global.covers_all()) return &state.global;
    return nullptr;
}

}  // namespace

VariantSetup configure_variant(Variant variant, const LossConfig& base, bool normalize_inference) {
    VariantSetup s;
    s.loss = base;
    s.plan.normalize_inference = normalize_inference;
    switch (variant) {
        case Variant::full:
            break;
        case Variant::no_share:
            s.plan.use_sce = false;
            s.plan.use_ls = false;
            s.plan.prototype_branch = Branch::decision;
            s.plan.inference_branch = Branch::decision;
            break;
        case Variant::no_decision:
            s.plan.use_dce = false;
            s.plan.use_ld = false;
            s.plan.inference_branch = Branch::shared;
            break;
        case Variant::no_hard:
            s.loss.hard_mining = false;
            break;
        case Variant::no_personalization:
            s.personalize = false;
            break;
        case Variant::l2_only_baseline:
            s.plan.use_dce = false;
            s.plan.use_ld = false;
            s.plan.inference_branch = Branch::shared;
            s.personalize = false;
            break;
    }
    return s;
}

double weighted_objective(std::span<const std::pair<std::uint64_t, double>> per_client) {
    if (per_client.empty()) throw ProtocolError("weighted_objective needs at least one client");
    double total_n = 0.0;
    for (const auto& [n, f] : per_client) {
        if (n == 0) throw ContractError("weighted_objective: client with n_k = 0");
        total_n += static_cast<double>(n);
    }
    double acc = 0.0;
    for (const auto& [n, f] : per_client) acc += (static_cast<double>(n) / total_n) * f;
    return acc;
}

double evaluate_client(const ClientModel& model, const LabeledDataset& test, const PrototypeSet& prototypes,
                       Branch branch, bool normalize) {
    if (test.size() == 0) throw ConfigError("evaluate_client: empty test shard");
    const auto predicted = predict_batch(model, test.features, prototypes, branch, normalize);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == test.labels[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

double RunMetrics::final_average_accuracy() const {
    for (auto it = rounds.rbegin(); it != rounds.rend(); ++it)
        if (it->average_accuracy) return *it->average_accuracy;
    return 0.0;
}

Summary summarize(std::span<const double> values) {
    Summary s;
    s.n = values.size();
    if (values.empty()) return s;
    s.min = values[0];
    s.max = values[0];
    double sum = 0.0;
    for (double v : values) {
        sum += v;
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }
    s.mean = sum / static_cast<double>(s.n);
    if (s.n > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(sq / static_cast<double>(s.n - 1));
    }
    return s;
}

RunMetrics run_simulation(const RunConfig& config, Variant variant, std::uint64_t seed) {
    config.validate();
    const LabeledDataset data = load_dataset(config.dataset, seed);
    const std::uint64_t partition_seed = config.partition.seed + seed;
    const PartitionPlan plan = dirichlet_partition(data, config.partition.clients, config.partition.alpha,
                                                   partition_seed);

    ArchitectureSpec arch;
    arch.widths = config.model.architectures;
    arch.activation = config.model.activation;
    arch.input_dim = data.input_dim();
    arch.d_z = config.model.d_z;
    arch.num_classes = data.num_classes;
    arch.separate_decision_head = config.model.separate_decision_head;
    arch.validate();

    const VariantSetup setup = configure_variant(variant, config.loss, config.normalize_inference);
    const std::uint64_t init_seed = derive_seed({seed, 0x30DE1ULL});

    std::vector<FederatedClient> clients;
    clients.reserve(plan.clients.size());
    for (std::size_t k = 0; k < plan.clients.size(); ++k) {
        const ShardSplit split =
            split_shard(plan.clients[k], config.partition.test_fraction, derive_seed({partition_seed, k, 0x5B11ULL}));
        TrainOptions opts;
        opts.epochs = config.training.epochs;
        opts.lr = config.training.lr;
        opts.batch_size = config.training.batch_size;
        opts.seed = derive_seed({seed, k, 0x7A1ULL});
        opts.loss = setup.loss;
        opts.plan = setup.plan;
        clients.emplace_back(build_client_model(arch, k, init_seed), data.subset(split.train),
                             data.subset(split.test), opts);
    }

    ServerState state =
        make_server_state(clients.size(), data.num_classes, config.model.d_z, config.fusion, setup.personalize);
    const std::uint64_t selection_seed = derive_seed({seed, 0x5E1ULL});

    RunMetrics metrics;
    metrics.variant = variant;
    metrics.seed = seed;
    for (std::size_t t = 0; t < config.training.rounds; ++t) {
        const auto start = std::chrono::steady_clock::now();
        const RoundOutcome outcome =
            run_round(state, clients, config.training.participation, selection_seed, config.workers);

        RoundRecord rec;
        rec.round = t;
        rec.empty = outcome.empty;
        std::vector<bool> trained(clients.size(), false);
        for (std::size_t k : outcome.selected) trained[k] = true;

        std::vector<std::optional<double>> acc(clients.size());
        parallel_for(clients.size(), config.workers, [&](std::size_t k) {
            const PrototypeSet* protos = evaluation_prototypes(clients[k], state);
            if (protos == nullptr || clients[k].test_shard().size() == 0) return;
            acc[k] = evaluate_client(clients[k].model(), clients[k].test_shard(), *protos,
                                     setup.plan.inference_branch, setup.plan.normalize_inference);
        });

        double acc_sum = 0.0;
        std::size_t acc_n = 0;
        std::vector<std::pair<std::uint64_t, double>> losses;
        for (std::size_t k = 0; k < clients.size(); ++k) {
            ClientRoundRecord c;
            c.client = k;
            c.trained = trained[k];
            c.accuracy = acc[k];
            if (c.trained) c.loss = clients[k].last_loss();
            if (c.accuracy) {
                acc_sum += *c.accuracy;
                ++acc_n;
            }
            if (c.loss) {
                rec.mean_loss.l_sce += c.loss->l_sce;
                rec.mean_loss.l_dce += c.loss->l_dce;
                rec.mean_loss.l_s += c.loss->l_s;
                rec.mean_loss.l_d += c.loss->l_d;
                rec.mean_loss.total += c.loss->total;
                rec.mean_loss.margin_m += c.loss->margin_m;
                losses.emplace_back(clients[k].train_shard().size(), c.loss->total);
            }
            rec.clients.push_back(c);
        }
        if (acc_n > 0) rec.average_accuracy = acc_sum / static_cast<double>(acc_n);
        if (!losses.empty()) {
            const double inv = 1.0 / static_cast<double>(losses.size());
            rec.mean_loss.l_sce *= inv;
            rec.mean_loss.l_dce *= inv;
            rec.mean_loss.l_s *= inv;
            rec.mean_loss.l_d *= inv;
            rec.mean_loss.total *= inv;
            rec.mean_loss.margin_m *= inv;
            rec.weighted_loss = weighted_objective(losses);
        }
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        metrics.rounds.push_back(std::move(rec));
    }
    return metrics;
}

ExperimentResult run_experiment(const RunConfig& config, Variant variant, std::span<const std::uint64_t> seeds) {
    if (seeds.empty()) throw ConfigError("run_experiment: no seeds given");
    ExperimentResult result;
    result.variant = variant;
    result.runs.resize(seeds.size());

    // Spread seeds over the workers; each run then trains its clients serially.
    RunConfig inner = config;
    const std::size_t workers = resolve_workers(config.workers);
    if (seeds.size() > 1 && workers > 1) inner.workers = 1;
    parallel_for(seeds.size(), seeds.size() > 1 ? workers : 1,
                 [&](std::size_t i) { result.runs[i] = run_simulation(inner, variant, seeds[i]); });

    std::vector<double> finals;
    for (const auto& run : result.runs) finals.push_back(run.final_average_accuracy());
    result.final_accuracy = summarize(finals);
    return result;
}

void write_metrics_csv(const RunMetrics& run, std::ostream& out) {
    out << "round,client,trained,accuracy," << kLossHeader << '\n';
    for (const auto& r : run.rounds) {
        for (const auto& c : r.clients) {
            out << r.round << ',' << c.client << ',' << (c.trained ? 1 : 0) << ',' << opt_num(c.accuracy) << ',';
            if (c.loss) {
                write_loss_cells(out, *c.loss);
            } else {
                out << ",,,,,";
            }
            out << '\n';
        }
    }
}

void write_rounds_csv(const RunMetrics& run, std::ostream& out) {
    out << "round,empty,trained_clients,average_accuracy,weighted_loss," << kLossHeader << '\n';
    for (const auto& r : run.rounds) {
        std::size_t trained = 0;
        for (const auto& c : r.clients) trained += c.trained ? 1 : 0;
        out << r.round << ',' << (r.empty ? 1 : 0) << ',' << trained << ',' << opt_num(r.average_accuracy) << ','
            << opt_num(r.weighted_loss) << ',';
        write_loss_cells(out, r.mean_loss);
        out << '\n';
    }
}

void write_timing_csv(const RunMetrics& run, std::ostream& out) {
    out << "round,wall_seconds\n";
    for (const auto& r : run.rounds) out << r.round << ',' << num(r.wall_seconds) << '\n';
}

void write_summary_csv(std::span<const ExperimentResult> results, std::ostream& out) {
    out << "variant,seeds,mean_final_accuracy,std_final_accuracy,min_final_accuracy,max_final_accuracy\n";
    for (const auto& r : results) {
        const Summary& s = r.final_accuracy;
        out << to_string(r.variant) << ',' << s.n << ',' << num(s.mean) << ',' << num(s.stddev) << ','
            << num(s.min) << ',' << num(s.max) << '\n';
    }
}

std::vector<std::filesystem::path> write_experiment(const std::filesystem::path& dir, const RunConfig& config,
                                                    const ExperimentResult& result) {
    std::vector<std::filesystem::path> written;
    for (const auto& run : result.runs) {
        const auto run_dir = dir / to_string(result.variant) / ("seed_" + std::to_string(run.seed));
        std::filesystem::create_directories(run_dir);
        auto open = [&](const char* name) {
            std::ofstream f(run_dir / name);
            if (!f) throw Error("cannot write " + (run_dir / name).string());
            return f;
        };
        {
            auto f = open("metrics.csv");
            write_metrics_csv(run, f);
        }
        {
            auto f = open("rounds.csv");
            write_rounds_csv(run, f);
        }
        {
            auto f = open("timing.csv");
            write_timing_csv(run, f);
        }
        {
            RunConfig echo = config;
            echo.variant = result.variant;
            auto f = open("manifest.json");
            f << run_manifest(echo, run.seed).dump(2) << '\n';
        }
        written.push_back(run_dir);
    }
    return written;
}

}  // namespace dualproto
