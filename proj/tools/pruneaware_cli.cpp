// Command-line driver for the pruning experiments.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pruneaware/binary_io.hpp"
#include "pruneaware/data.hpp"
#include "pruneaware/errors.hpp"
#include "pruneaware/frae.hpp"
#include "pruneaware/harness.hpp"
#include "pruneaware/objective.hpp"
#include "pruneaware/param_space.hpp"

namespace fs = std::filesystem;
using namespace pruneaware;

namespace
{

constexpr int kPartialFailure = 2;

ExperimentConfig config_from(const std::string& path)
{
    if (path.empty())
    {
        ExperimentConfig c;
        c.validate();
        return c;
    }
    return load_config(path);
}

void print_weight_summary(const ParamVector& w)
{
    const auto zeros = (w.array() == 0.0).count();
    fmt::print("parameters: {}\nzeros: {} ({:.2f} %)\n", w.size(), zeros,
               w.size() ? 100.0 * static_cast<double>(zeros) / static_cast<double>(w.size()) : 0.0);
    if (w.size())
        fmt::print("min/max: {} / {}\nl2 norm: {}\n", w.minCoeff(), w.maxCoeff(), w.norm());
}

void inspect(const std::string& path)
{
    const auto magic = io::peek_magic(path);
    const std::string tag(magic.begin(), magic.end());
    if (tag == "FRAE")
    {
        const FraeModel m = load_model(path);
        const auto& c = m.config;
        fmt::print("model checkpoint {}\n", path);
        fmt::print("input_dim {} latent_dim {} encoder_hidden {} decoder_hidden {} codebook_size {}\n", c.input_dim,
                   c.latent_dim, c.encoder_hidden, c.decoder_hidden, c.codebook_size);
        fmt::print("weights: {} ({} decoder), bits per frame: {}\n", c.weight_count(),
                   m.partition->decoder_weights.size(), c.bits_per_frame());
        print_weight_summary(m.params);
        for (const auto& layer : m.partition->layers)
        {
            const auto block = m.params.segment(layer.weight_offset, layer.rows * layer.cols);
            fmt::print("  {:<9} {:>3}x{:<3} zero weights {}\n", layer.name, layer.rows, layer.cols,
                       (block.array() == 0.0).count());
        }
    }
    else if (tag == "PAWV")
    {
        fmt::print("parameter vector {}\n", path);
        print_weight_summary(load_params(path));
    }
    else if (tag == "PAWM")
    {
        const PruningMask mask = load_mask(path);
        fmt::print("pruning mask {}\npruned indices: {}\n", path, mask.size());
        if (!mask.empty())
            fmt::print("range: {} .. {}\n", mask.indices().front(), mask.indices().back());
    }
    else if (tag == "STIM")
    {
        const Dataset data = load_patterns(path);
        Index frames = 0;
        for (const auto& s : data)
            frames += s.length();
        fmt::print("pattern file {}\nsequences: {}\nframes: {}\n", path, data.size(), frames);
        if (!data.empty())
            fmt::print("frame rate: {} Hz, channels: {}\n", data.front().frame_rate, data.front().frames.rows());
    }
    else
        throw FormatError("unrecognized file type '" + tag + "'", 0);
}

void print_records(const std::vector<ResultRecord>& records)
{
    write_results_csv(std::cout, records);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Pruning-aware training experiments for a frame-wise recurrent autoencoder"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;

    auto* gen = app.add_subcommand("gen-data", "Write a synthetic pattern file");
    Index gen_sequences = 100;
    Index gen_frames = 40;
    std::uint64_t gen_seed = 1001;
    std::string gen_out;
    std::string gen_from_csv;
    gen->add_option("--sequences", gen_sequences, "Number of sequences")->check(CLI::PositiveNumber);
    gen->add_option("--frames", gen_frames, "Frames per sequence")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--from-csv", gen_from_csv, "Convert a CSV pattern file instead of generating")
        ->check(CLI::ExistingFile);
    gen->add_option("-o,--out", gen_out, "Output pattern file")->required();

    auto* train = app.add_subcommand("train-reference", "Train (or load cached) reference models");
    std::vector<std::uint64_t> train_seeds;
    train->add_option("-c,--config", config_path, "Config file")->check(CLI::ExistingFile);
    train->add_option("-o,--out", out_dir, "Output directory")->required();
    train->add_option("--seed", train_seeds, "Seeds (default: config seeds)");

    auto* cell = app.add_subcommand("run-cell", "Run one arm for one rate, scope and seed");
    std::string cell_arm = "pa";
    std::string cell_scope = "whole_model";
    std::string cell_g = "linear";
    double cell_rate = 0.5;
    std::uint64_t cell_seed = 1;
    bool cell_no_finetune = false;
    cell->add_option("-c,--config", config_path, "Config file")->check(CLI::ExistingFile);
    cell->add_option("-o,--out", out_dir, "Output directory")->required();
    cell->add_option("--arm", cell_arm, "pa or baseline");
    cell->add_option("--scope", cell_scope, "whole_model or decoder_only");
    cell->add_option("--g", cell_g, "Perturbation function: linear, square, cube, sqrt");
    cell->add_option("--rate", cell_rate, "Pruning rate")->check(CLI::Range(0.0, 1.0));
    cell->add_option("--seed", cell_seed, "Seed");
    cell->add_flag("--no-finetune", cell_no_finetune, "Stop after pruning");

    auto* sw = app.add_subcommand("sweep", "Run every cell of the configured grid");
    unsigned jobs = 1;
    bool sweep_no_finetune = false;
    sw->add_option("-c,--config", config_path, "Config file")->check(CLI::ExistingFile);
    sw->add_option("-o,--out", out_dir, "Output directory")->required();
    sw->add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    sw->add_flag("--no-finetune", sweep_no_finetune, "Stop every cell after pruning");

    auto* plot = app.add_subcommand("plot-data", "Aggregate results.csv into per-figure CSVs");
    std::string results_path;
    std::vector<std::string> figure_names;
    plot->add_option("-r,--results", results_path, "results.csv")->required()->check(CLI::ExistingFile);
    plot->add_option("-f,--figure", figure_names, "Figures (default: all)");
    plot->add_option("-o,--out", out_dir, "Output directory (default: print to stdout)");

    auto* insp = app.add_subcommand("inspect-checkpoint", "Describe a model, parameter, mask or pattern file");
    std::string inspect_path;
    insp->add_option("file", inspect_path, "File to inspect")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*gen)
        {
            const Dataset data = gen_from_csv.empty() ? generate_synthetic(gen_sequences, gen_frames, gen_seed)
                                                      : load_patterns_csv(gen_from_csv);
            save_patterns(gen_out, data);
            fmt::print("wrote {} sequences to {}\n", data.size(), gen_out);
        }
        else if (*train)
        {
            ExperimentContext ctx(config_from(config_path), fs::path(out_dir));
            if (train_seeds.empty())
                train_seeds = ctx.config().seeds;
            const Fitness test = ctx.test_fitness();
            for (auto seed : train_seeds)
            {
                const FraeModel& ref = ctx.reference(seed);
                fmt::print("seed {}: {} (test fitness {})\n", seed, ctx.reference_path(seed).string(),
                           test(ref.params));
            }
        }
        else if (*cell)
        {
            ExperimentContext ctx(config_from(config_path), fs::path(out_dir));
            const CellSpec spec{parse_arm(cell_arm), parse_scope(cell_scope), cell_rate, parse_perturbation(cell_g),
                                cell_seed};
            const ResultRecord rec = run_cell(ctx, spec, !cell_no_finetune);
            print_records({rec});
            if (!rec.ok())
            {
                std::cerr << "cell failed: " << rec.error << "\n";
                return kPartialFailure;
            }
        }
        else if (*sw)
        {
            ExperimentContext ctx(config_from(config_path), fs::path(out_dir));
            const SweepResult result = sweep(ctx, jobs, &std::cerr, !sweep_no_finetune);
            fmt::print("{} cells, {} failed; results in {}\n", result.records.size(), result.failed,
                       (fs::path(out_dir) / "results.csv").string());
            if (result.failed > 0)
                return kPartialFailure;
        }
        else if (*plot)
        {
            std::ifstream in(results_path);
            const auto records = read_results_csv(in);
            std::vector<Figure> figures;
            for (const auto& name : figure_names)
                figures.push_back(parse_figure(name));
            if (figures.empty())
                figures = all_figures();
            int status = 0;
            for (Figure fig : figures)
            {
                try
                {
                    const std::string csv = emit_plot_data(records, fig);
                    if (out_dir.empty())
                        fmt::print("# {}\n{}", to_string(fig), csv);
                    else
                    {
                        fs::create_directories(out_dir);
                        std::ofstream(fs::path(out_dir) / fmt::format("figure_{}.csv", to_string(fig))) << csv;
                    }
                }
                catch (const MissingSeriesError& e)
                {
                    std::cerr << e.what() << "\n";
                    status = kPartialFailure;
                }
            }
            return status;
        }
        else if (*insp)
            inspect(inspect_path);
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
