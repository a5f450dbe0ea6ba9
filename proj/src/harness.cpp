#include "pruneaware/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <future>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace pruneaware
{

namespace
{

std::uint64_t mix(std::uint64_t h, std::uint64_t v)
{
    std::uint64_t x = h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep = ',')
{
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss{std::string(s)};
    while (std::getline(ss, item, sep))
    {
        auto t = trim(item);
        if (!t.empty())
            out.push_back(std::move(t));
    }
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value)
{
    try
    {
        std::size_t used = 0;
        T out{};
        if constexpr (std::is_floating_point_v<T>)
            out = static_cast<T>(std::stod(value, &used));
        else if constexpr (std::is_signed_v<T>)
            out = static_cast<T>(std::stoll(value, &used));
        else
        {
            if (!value.empty() && value.front() == '-')
                throw std::invalid_argument("negative");
            out = static_cast<T>(std::stoull(value, &used));
        }
        if (used != value.size())
            throw std::invalid_argument("trailing characters");
        return out;
    }
    catch (const std::exception&)
    {
        throw ConfigError("invalid value '" + value + "' for '" + key + "'");
    }
}

template <typename T>
std::string join(const std::vector<T>& items)
{
    std::string out;
    for (const auto& item : items)
    {
        if (!out.empty())
            out += ", ";
        if constexpr (std::is_arithmetic_v<T>)
            out += fmt::format("{}", item);
        else
            out += std::string(to_string(item));
    }
    return out;
}

std::string csv_safe(std::string s)
{
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration

std::vector<double> default_rate_grid()
{
    std::vector<double> grid;
    for (int j = 1; j <= 19; ++j)
        grid.push_back(static_cast<double>(j) / 20.0);
    return grid;
}

void ExperimentConfig::validate() const
{
    if (scopes.empty() || rate_grid.empty() || g_kinds.empty() || seeds.empty())
        throw ConfigError("scopes, rates, g_kinds and seeds must be non-empty");
    for (double r : rate_grid)
        if (!(r >= 0.0 && r <= 1.0))
            throw ConfigError(fmt::format("pruning rate {} outside [0, 1]", r));
    if (!(lambda >= 0.0))
        throw ConfigError("lambda must be non-negative");
    if (pa_iterations == 0)
        throw ConfigError("pa_iterations must be positive");
    if (pa_iterations + finetune_iterations != baseline_iterations)
        throw ConfigError(fmt::format("pa_iterations + finetune_iterations ({} + {}) must equal baseline_iterations ({})",
                                      pa_iterations, finetune_iterations, baseline_iterations));
    gain.validate();
    fitness.validate();
    model.validate();
    if (model.input_dim != kChannels)
        throw ConfigError(fmt::format("model input_dim must be {}", kChannels));
    if (data.train_file.empty() && (data.train_sequences <= 0 || data.frames_per_sequence <= 0))
        throw ConfigError("synthetic training data needs positive sequence and frame counts");
    if (data.test_file.empty() && data.test_sequences <= 0)
        throw ConfigError("synthetic test data needs a positive sequence count");
    if (fitness.kind == FitnessKind::envelope_correlation && data.train_file.empty() &&
        data.frames_per_sequence < fitness.window_frames)
        throw ConfigError("frames_per_sequence is shorter than the fitness window");
}

ExperimentConfig parse_config(const std::string& text)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try
    {
        pt::ini_parser::read_ini(in, tree);
    }
    catch (const pt::ini_parser_error& e)
    {
        throw ConfigError(std::string("config syntax error: ") + e.what());
    }

    ExperimentConfig c;
    for (const auto& [section, body] : tree)
    {
        if (body.empty() && !body.data().empty())
            throw ConfigError("key '" + section + "' must live in a [section]");
        for (const auto& [key, node] : body)
        {
            const std::string name = section + "." + key;
            const std::string v = trim(node.data());
            if (name == "experiment.scopes")
            {
                c.scopes.clear();
                for (const auto& s : split_list(v))
                    c.scopes.push_back(parse_scope(s));
            }
            else if (name == "experiment.rates")
            {
                c.rate_grid.clear();
                if (v == "default")
                    c.rate_grid = default_rate_grid();
                else
                    for (const auto& s : split_list(v))
                        c.rate_grid.push_back(parse_number<double>(name, s));
            }
            else if (name == "experiment.g_kinds")
            {
                c.g_kinds.clear();
                for (const auto& s : split_list(v))
                    c.g_kinds.push_back(parse_perturbation(s));
            }
            else if (name == "experiment.lambda")
                c.lambda = parse_number<double>(name, v);
            else if (name == "experiment.seeds")
            {
                c.seeds.clear();
                for (const auto& s : split_list(v))
                    c.seeds.push_back(parse_number<std::uint64_t>(name, s));
            }
            else if (name == "protocol.reference_iterations")
                c.reference_iterations = parse_number<std::uint64_t>(name, v);
            else if (name == "protocol.pa_iterations")
                c.pa_iterations = parse_number<std::uint64_t>(name, v);
            else if (name == "protocol.finetune_iterations")
                c.finetune_iterations = parse_number<std::uint64_t>(name, v);
            else if (name == "protocol.baseline_iterations")
                c.baseline_iterations = parse_number<std::uint64_t>(name, v);
            else if (name == "protocol.trace_stride")
                c.trace_stride = parse_number<std::uint64_t>(name, v);
            else if (name == "spsa.a")
                c.gain.a = parse_number<double>(name, v);
            else if (name == "spsa.A")
                c.gain.A = parse_number<double>(name, v);
            else if (name == "spsa.gamma")
                c.gain.gamma = parse_number<double>(name, v);
            else if (name == "spsa.c")
                c.gain.c = parse_number<double>(name, v);
            else if (name == "spsa.beta")
                c.gain.beta = parse_number<double>(name, v);
            else if (name == "fitness.kind")
                c.fitness.kind = parse_fitness_kind(v);
            else if (name == "fitness.window_frames")
                c.fitness.window_frames = parse_number<Index>(name, v);
            else if (name == "fitness.score_floor")
                c.fitness.score_floor = parse_number<double>(name, v);
            else if (name == "model.latent_dim")
                c.model.latent_dim = parse_number<Index>(name, v);
            else if (name == "model.encoder_hidden")
                c.model.encoder_hidden = parse_number<Index>(name, v);
            else if (name == "model.decoder_hidden")
                c.model.decoder_hidden = parse_number<Index>(name, v);
            else if (name == "model.codebook_size")
                c.model.codebook_size = parse_number<Index>(name, v);
            else if (name == "data.train_sequences")
                c.data.train_sequences = parse_number<Index>(name, v);
            else if (name == "data.test_sequences")
                c.data.test_sequences = parse_number<Index>(name, v);
            else if (name == "data.frames_per_sequence")
                c.data.frames_per_sequence = parse_number<Index>(name, v);
            else if (name == "data.train_seed")
                c.data.train_seed = parse_number<std::uint64_t>(name, v);
            else if (name == "data.test_seed")
                c.data.test_seed = parse_number<std::uint64_t>(name, v);
            else if (name == "data.train_file")
                c.data.train_file = v;
            else if (name == "data.test_file")
                c.data.test_file = v;
            else
                throw ConfigError("unknown config key '" + name + "'");
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& c)
{
    std::string out;
    out += "[experiment]\n";
    out += "scopes = " + join(c.scopes) + "\n";
    out += "rates = " + join(c.rate_grid) + "\n";
    out += "g_kinds = " + join(c.g_kinds) + "\n";
    out += fmt::format("lambda = {}\n", c.lambda);
    out += "seeds = " + join(c.seeds) + "\n\n";
    out += "[protocol]\n";
    out += fmt::format("reference_iterations = {}\npa_iterations = {}\nfinetune_iterations = {}\n"
                       "baseline_iterations = {}\ntrace_stride = {}\n\n",
                       c.reference_iterations, c.pa_iterations, c.finetune_iterations, c.baseline_iterations,
                       c.trace_stride);
    out += fmt::format("[spsa]\na = {}\nA = {}\ngamma = {}\nc = {}\nbeta = {}\n\n", c.gain.a, c.gain.A, c.gain.gamma,
                       c.gain.c, c.gain.beta);
    out += fmt::format("[fitness]\nkind = {}\nwindow_frames = {}\nscore_floor = {}\n\n", to_string(c.fitness.kind),
                       c.fitness.window_frames, c.fitness.score_floor);
    out += fmt::format("[model]\nlatent_dim = {}\nencoder_hidden = {}\ndecoder_hidden = {}\ncodebook_size = {}\n\n",
                       c.model.latent_dim, c.model.encoder_hidden, c.model.decoder_hidden, c.model.codebook_size);
    out += fmt::format("[data]\ntrain_sequences = {}\ntest_sequences = {}\nframes_per_sequence = {}\n"
                       "train_seed = {}\ntest_seed = {}\n",
                       c.data.train_sequences, c.data.test_sequences, c.data.frames_per_sequence, c.data.train_seed,
                       c.data.test_seed);
    if (!c.data.train_file.empty())
        out += "train_file = " + c.data.train_file + "\n";
    if (!c.data.test_file.empty())
        out += "test_file = " + c.data.test_file + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Cells

std::string_view to_string(Arm a) { return a == Arm::pa ? "pa" : "baseline"; }

Arm parse_arm(std::string_view s)
{
    if (s == "pa")
        return Arm::pa;
    if (s == "baseline")
        return Arm::baseline;
    throw ConfigError("unknown arm '" + std::string(s) + "'");
}

std::string CellSpec::label() const
{
    const std::string g = arm == Arm::pa ? std::string(to_string(g_kind)) + "_" : std::string();
    return fmt::format("{}_{}_{}r{}_s{}", to_string(arm), to_string(scope), g, rate, seed);
}

std::uint64_t cell_stream_seed(const CellSpec& cell)
{
    std::uint64_t h = mix(0x5eedull, cell.seed);
    h = mix(h, static_cast<std::uint64_t>(cell.arm));
    h = mix(h, static_cast<std::uint64_t>(cell.scope));
    h = mix(h, cell.arm == Arm::pa ? static_cast<std::uint64_t>(cell.g_kind) : 0xffull);
    return mix(h, static_cast<std::uint64_t>(std::llround(cell.rate * 1e9)));
}

ExperimentContext::ExperimentContext(ExperimentConfig config, std::optional<std::filesystem::path> output_dir)
    : config_(std::move(config)), output_dir_(std::move(output_dir)),
      architecture_(init_model(config_.model, 0))
{
    config_.validate();
    const auto& d = config_.data;
    train_ = d.train_file.empty() ? generate_synthetic(d.train_sequences, d.frames_per_sequence, d.train_seed)
                                  : load_patterns(d.train_file);
    test_ = d.test_file.empty() ? generate_synthetic(d.test_sequences, d.frames_per_sequence, d.test_seed)
                                : load_patterns(d.test_file);
    if (train_.empty() || test_.empty())
        throw ConfigError("training and test sets must be non-empty");
    if (output_dir_)
        std::filesystem::create_directories(*output_dir_);
}

Fitness ExperimentContext::train_fitness() const { return make_dataset_fitness(architecture_, train_, config_.fitness); }

Fitness ExperimentContext::test_fitness() const { return make_dataset_fitness(architecture_, test_, config_.fitness); }

std::filesystem::path ExperimentContext::reference_path(std::uint64_t seed) const
{
    if (!output_dir_)
        throw ContractError("experiment has no output directory");
    return *output_dir_ / fmt::format("reference_s{}.frae", seed);
}

const FraeModel& ExperimentContext::reference(std::uint64_t seed)
{
    std::promise<FraeModel> promise;
    std::shared_future<FraeModel> future;
    bool owner = false;
    {
        std::lock_guard lock(mutex_);
        auto it = reference_futures_.find(seed);
        if (it == reference_futures_.end())
        {
            future = promise.get_future().share();
            reference_futures_.emplace(seed, future);
            owner = true;
        }
        else
            future = it->second;
    }
    if (owner)
    {
        try
        {
            if (output_dir_ && std::filesystem::exists(reference_path(seed)))
            {
                FraeModel cached = load_model(reference_path(seed).string());
                if (!(cached.config == config_.model))
                    throw ConfigError("cached reference " + reference_path(seed).string() +
                                      " does not match the model configuration");
                promise.set_value(std::move(cached));
            }
            else
            {
                FraeModel model = init_model(config_.model, seed);
                SpsaOptions opt;
                opt.gains = config_.gain;
                opt.iterations = config_.reference_iterations;
                opt.seed = mix(mix(0x7efull, seed), 0x12345ull);
                opt.trace_stride = config_.trace_stride;
                auto trained = optimize(model.params, train_fitness(), opt);
                model.params = std::move(trained.params);
                if (output_dir_)
                {
                    save_model(reference_path(seed).string(), model);
                    if (!trained.trace.empty())
                    {
                        std::ofstream trace(*output_dir_ / fmt::format("reference_s{}.trace.csv", seed));
                        write_trace_csv(trace, trained.trace);
                    }
                }
                promise.set_value(std::move(model));
            }
        }
        catch (...)
        {
            promise.set_exception(std::current_exception());
        }
    }
    return future.get();
}

namespace
{

void write_cell_artifacts(const ExperimentContext& ctx, const CellSpec& cell, const FraeModel& ref,
                          const ParamVector& pruned, const ParamVector& final_params, const PruningMask& mask,
                          const std::vector<TraceRow>& trace)
{
    if (!ctx.output_dir())
        return;
    const auto dir = *ctx.output_dir() / "cells";
    std::filesystem::create_directories(dir);
    const auto stem = (dir / cell.label()).string();
    save_model(stem + ".pruned.frae", ref.with_params(pruned));
    save_model(stem + ".final.frae", ref.with_params(final_params));
    save_mask(stem + ".mask", mask);
    if (!trace.empty())
    {
        std::ofstream out(stem + ".trace.csv");
        write_trace_csv(out, trace);
    }
}

} // namespace

ResultRecord run_pa_arm(ExperimentContext& ctx, const CellSpec& cell, bool finetune)
{
    if (cell.arm != Arm::pa)
        throw ContractError("run_pa_arm called with a baseline cell");
    const auto& cfg = ctx.config();
    const FraeModel& ref = ctx.reference(cell.seed);
    const WeightPartition& part = *ref.partition;
    const Fitness f_train = ctx.train_fitness();
    const Fitness f_test = ctx.test_fitness();

    const PerturbationSchedule sched{cell.g_kind, cfg.pa_iterations, cell.rate, cell.scope, cfg.lambda};
    sched.validate();
    const ScheduledFitness pa_objective = [&](const ParamVector& w, std::uint64_t n) {
        return pa_fitness(f_train, w, part, sched, n);
    };

    ResultRecord rec;
    rec.cell = cell;
    SpsaOptions opt;
    opt.gains = cfg.gain;
    opt.seed = cell_stream_seed(cell);
    opt.trace_stride = cfg.trace_stride;
    opt.iterations = cfg.pa_iterations;
    auto trained = optimize(ref.params, pa_objective, opt);
    rec.pa_steps = trained.steps;
    rec.fitness_pre_prune = f_test(trained.params);

    // The pruning applied is the magnitude mask at full schedule strength.
    const PruningMask mask = select_pruned_indices(trained.params, part, cell.rate, cell.scope);
    const ParamVector pruned = apply_mask(trained.params, mask);
    rec.pruned_count = mask.size();
    rec.fitness_post_prune = f_test(pruned);
    if (!finetune)
    {
        rec.fitness_post_finetune = std::numeric_limits<double>::quiet_NaN();
        write_cell_artifacts(ctx, cell, ref, pruned, pruned, mask, trained.trace);
        return rec;
    }

    opt.iterations = cfg.finetune_iterations;
    opt.start_iteration = cfg.pa_iterations;
    opt.freeze = mask;
    auto tuned = optimize(pruned, f_train, opt);
    rec.finetune_steps = tuned.steps;
    rec.fitness_post_finetune = f_test(tuned.params);

    auto trace = std::move(trained.trace);
    trace.insert(trace.end(), tuned.trace.begin(), tuned.trace.end());
    write_cell_artifacts(ctx, cell, ref, pruned, tuned.params, mask, trace);
    return rec;
}

ResultRecord run_baseline_arm(ExperimentContext& ctx, const CellSpec& cell, bool finetune)
{
    if (cell.arm != Arm::baseline)
        throw ContractError("run_baseline_arm called with a pruning-aware cell");
    const auto& cfg = ctx.config();
    const FraeModel& ref = ctx.reference(cell.seed);
    const Fitness f_train = ctx.train_fitness();
    const Fitness f_test = ctx.test_fitness();

    ResultRecord rec;
    rec.cell = cell;
    rec.fitness_pre_prune = f_test(ref.params);
    const PruningMask mask = select_pruned_indices(ref.params, *ref.partition, cell.rate, cell.scope);
    const ParamVector pruned = apply_mask(ref.params, mask);
    rec.pruned_count = mask.size();
    rec.fitness_post_prune = f_test(pruned);
    if (!finetune)
    {
        rec.fitness_post_finetune = std::numeric_limits<double>::quiet_NaN();
        write_cell_artifacts(ctx, cell, ref, pruned, pruned, mask, {});
        return rec;
    }

    SpsaOptions opt;
    opt.gains = cfg.gain;
    opt.seed = cell_stream_seed(cell);
    opt.trace_stride = cfg.trace_stride;
    opt.iterations = cfg.baseline_iterations;
    opt.freeze = mask;
    auto tuned = optimize(pruned, f_train, opt);
    rec.finetune_steps = tuned.steps;
    rec.fitness_post_finetune = f_test(tuned.params);

    write_cell_artifacts(ctx, cell, ref, pruned, tuned.params, mask, tuned.trace);
    return rec;
}

ResultRecord run_cell(ExperimentContext& ctx, const CellSpec& cell, bool finetune)
{
    try
    {
        return cell.arm == Arm::pa ? run_pa_arm(ctx, cell, finetune) : run_baseline_arm(ctx, cell, finetune);
    }
    catch (const std::exception& e)
    {
        ResultRecord rec;
    rec.cell = cell;
        rec.error = e.what();
        return rec;
    }
}

std::vector<CellSpec> sweep_cells(const ExperimentConfig& config)
{
    std::vector<CellSpec> cells;
    for (auto seed : config.seeds)
        for (auto scope : config.scopes)
            for (double rate : config.rate_grid)
            {
                cells.push_back({Arm::baseline, scope, rate, PerturbationKind::linear, seed});
                for (auto g : config.g_kinds)
                    cells.push_back({Arm::pa, scope, rate, g, seed});
            }
    return cells;
}

SweepResult sweep(ExperimentContext& ctx, unsigned jobs, std::ostream* log, bool finetune)
{
    const auto cells = sweep_cells(ctx.config());
    std::vector<ResultRecord> records(cells.size());
    std::mutex log_mutex;
    auto say = [&](const std::string& line) {
        if (!log)
            return;
        std::lock_guard lock(log_mutex);
        *log << line << std::endl;
    };

    jobs = std::max(1u, jobs);
    auto run_pool = [jobs](std::size_t count, auto&& body) {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> workers;
        for (unsigned j = 0; j < std::min<std::size_t>(jobs, count); ++j)
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++)
                    body(i);
            });
    };

    const auto& seeds = ctx.config().seeds;
    std::vector<std::string> reference_errors(seeds.size());
    run_pool(seeds.size(), [&](std::size_t i) {
        try
        {
            const auto& ref = ctx.reference(seeds[i]);
            say(fmt::format("reference seed {} ready ({} parameters)", seeds[i], ref.params.size()));
        }
        catch (const std::exception& e)
        {
            say(fmt::format("reference seed {} failed: {}", seeds[i], e.what()));
        }
    });

    std::atomic<std::size_t> done{0};
    run_pool(cells.size(), [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        records[i] = run_cell(ctx, cells[i], finetune);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto& r = records[i];
        say(r.ok() ? fmt::format("[{}/{}] {}: pre {:.4f} post {:.4f} tuned {:.4f} ({:.1f} s)", ++done, cells.size(),
                                 cells[i].label(), r.fitness_pre_prune, r.fitness_post_prune, r.fitness_post_finetune,
                                 secs)
                   : fmt::format("[{}/{}] {}: FAILED {}", ++done, cells.size(), cells[i].label(), r.error));
    });

    SweepResult result{std::move(records), 0};
    result.failed = static_cast<std::size_t>(
        std::count_if(result.records.begin(), result.records.end(), [](const ResultRecord& r) { return !r.ok(); }));

    if (const auto& dir = ctx.output_dir())
    {
        {
            std::ofstream cfg_out(*dir / "config.ini");
            cfg_out << format_config(ctx.config());
        }
        {
            const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
            std::ofstream out(*dir / "results.csv");
            write_results_csv(out, result.records, fmt::format("pruneaware sweep, generated at unix time {}", now));
        }
        for (Figure fig : all_figures())
        {
            try
            {
                const std::string csv = emit_plot_data(result.records, fig);
                std::ofstream out(*dir / fmt::format("figure_{}.csv", to_string(fig)));
                out << csv;
            }
            catch (const MissingSeriesError& e)
            {
                say(fmt::format("figure {} skipped: {}", to_string(fig), e.what()));
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Results table

namespace
{
constexpr std::string_view kResultsHeader =
    "arm,scope,rate,g_kind,seed,fitness_pre_prune,fitness_post_prune,fitness_post_finetune,pruned_count,pa_steps,"
    "finetune_steps,total_steps,error";
}

void write_results_csv(std::ostream& out, const std::vector<ResultRecord>& records, std::string_view comment)
{
    if (!comment.empty())
        out << "# " << comment << "\n";
    out << kResultsHeader << "\n";
    for (const auto& r : records)
    {
        const auto& c = r.cell;
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", to_string(c.arm), to_string(c.scope), c.rate,
                           c.arm == Arm::pa ? to_string(c.g_kind) : std::string_view("none"), c.seed,
                           r.fitness_pre_prune, r.fitness_post_prune, r.fitness_post_finetune, r.pruned_count,
                           r.pa_steps, r.finetune_steps, r.total_steps(), csv_safe(r.error));
    }
}

std::vector<ResultRecord> read_results_csv(std::istream& in)
{
    std::vector<ResultRecord> out;
    std::string line;
    std::uint64_t offset = 0;
    bool header_seen = false;
    while (std::getline(in, line))
    {
        const auto at = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        if (!header_seen)
        {
            if (line != kResultsHeader)
                throw FormatError("unexpected results header", at);
            header_seen = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() == 12)
            f.emplace_back();
        if (f.size() != 13)
            throw FormatError("results row has " + std::to_string(f.size()) + " fields, expected 13", at);
        try
        {
            ResultRecord r;
            r.cell.arm = parse_arm(f[0]);
            r.cell.scope = parse_scope(f[1]);
            r.cell.rate = std::stod(f[2]);
            r.cell.g_kind = f[3] == "none" ? PerturbationKind::linear : parse_perturbation(f[3]);
            r.cell.seed = std::stoull(f[4]);
            r.fitness_pre_prune = std::stod(f[5]);
            r.fitness_post_prune = std::stod(f[6]);
            r.fitness_post_finetune = std::stod(f[7]);
            r.pruned_count = std::stoll(f[8]);
            r.pa_steps = std::stoull(f[9]);
            r.finetune_steps = std::stoull(f[10]);
            r.error = f[12];
            out.push_back(std::move(r));
        }
        catch (const FormatError&)
        {
            throw;
        }
        catch (const std::exception& e)
        {
            throw FormatError(std::string("bad results row: ") + e.what(), at);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Plot data

std::string_view to_string(Figure f)
{
    switch (f)
    {
    case Figure::baseline_scopes:
        return "baseline_scopes";
    case Figure::whole_model_compare:
        return "whole_model_compare";
    case Figure::decoder_only_compare:
        return "decoder_only_compare";
    case Figure::perturbation_compare:
        return "perturbation_compare";
    case Figure::pre_prune:
        return "pre_prune";
    case Figure::finetuned:
        return "finetuned";
    }
    return "?";
}

std::vector<Figure> all_figures()
{
    return {Figure::baseline_scopes, Figure::whole_model_compare, Figure::decoder_only_compare,
            Figure::perturbation_compare, Figure::pre_prune, Figure::finetuned};
}

Figure parse_figure(std::string_view s)
{
    const auto figs = all_figures();
    for (std::size_t i = 0; i < figs.size(); ++i)
        if (s == to_string(figs[i]) || s == fmt::format("fig{}", i + 1))
            return figs[i];
    throw ConfigError("unknown figure '" + std::string(s) + "'");
}

namespace
{

enum class Field
{
    pre,
    post,
    finetuned
};

struct SeriesDef
{
    std::string name;
    Arm arm;
    std::optional<Scope> scope;
    std::optional<PerturbationKind> g_kind;
    Field field;
};

std::vector<SeriesDef> series_defs(Figure figure)
{
    using enum Field;
    constexpr auto W = Scope::whole_model;
    constexpr auto D = Scope::decoder_only;
    constexpr auto lin = PerturbationKind::linear;
    switch (figure)
    {
    case Figure::baseline_scopes:
        return {{"baseline_whole_model", Arm::baseline, W, {}, post},
                {"baseline_decoder_only", Arm::baseline, D, {}, post},
                {"reference", Arm::baseline, {}, {}, pre}};
    case Figure::whole_model_compare:
        return {{"baseline", Arm::baseline, W, {}, post}, {"pa_linear", Arm::pa, W, lin, post}};
    case Figure::decoder_only_compare:
        return {{"baseline", Arm::baseline, D, {}, post}, {"pa_linear", Arm::pa, D, lin, post}};
    case Figure::perturbation_compare:
        return {{"baseline", Arm::baseline, W, {}, post},
                {"pa_linear", Arm::pa, W, lin, post},
                {"pa_square", Arm::pa, W, PerturbationKind::square, post},
                {"pa_cube", Arm::pa, W, PerturbationKind::cube, post}};
    case Figure::pre_prune:
        return {{"pa_linear_pre_prune", Arm::pa, W, lin, pre}, {"reference", Arm::baseline, {}, {}, pre}};
    case Figure::finetuned:
        return {{"baseline_whole_model", Arm::baseline, W, {}, finetuned},
                {"pa_linear_whole_model", Arm::pa, W, lin, finetuned},
                {"baseline_decoder_only", Arm::baseline, D, {}, finetuned},
                {"pa_linear_decoder_only", Arm::pa, D, lin, finetuned}};
    }
    return {};
}

} // namespace

std::vector<std::string> figure_series(Figure figure)
{
    std::vector<std::string> names;
    for (const auto& s : series_defs(figure))
        names.push_back(s.name);
    return names;
}

std::string emit_plot_data(const std::vector<ResultRecord>& records, Figure figure)
{
    const auto defs = series_defs(figure);
    std::set<double> rates;
    for (const auto& r : records)
        rates.insert(r.cell.rate);

    std::vector<std::string> missing;
    if (rates.empty())
        for (const auto& s : defs)
            missing.push_back(s.name + " (no cells)");

    std::vector<std::vector<double>> columns(defs.size());
    for (std::size_t si = 0; si < defs.size(); ++si)
    {
        const auto& s = defs[si];
        for (double rate : rates)
        {
            std::map<std::uint64_t, double> per_seed;
            for (const auto& r : records)
            {
                const auto& c = r.cell;
                if (!r.ok() || c.arm != s.arm || c.rate != rate || (s.scope && c.scope != *s.scope) ||
                    (s.g_kind && c.g_kind != *s.g_kind))
                    continue;
                const double v = s.field == Field::pre    ? r.fitness_pre_prune
                                 : s.field == Field::post ? r.fitness_post_prune
                                                          : r.fitness_post_finetune;
                per_seed.emplace(c.seed, v);
            }
            if (per_seed.empty())
            {
                missing.push_back(fmt::format("{} at rate {}", s.name, rate));
                continue;
            }
            std::vector<double> values;
            for (const auto& [seed, v] : per_seed)
                values.push_back(v);
            columns[si].push_back(median(std::move(values)));
        }
    }
    if (!missing.empty())
    {
        std::string what = fmt::format("figure {} is missing {} cell(s):", to_string(figure), missing.size());
        for (const auto& m : missing)
            what += " [" + m + "]";
        throw MissingSeriesError(what, std::move(missing));
    }

    std::string out = "rate";
    for (const auto& s : defs)
        out += "," + s.name;
    out += "\n";
    std::size_t row = 0;
    for (double rate : rates)
    {
        out += fmt::format("{}", rate);
        for (const auto& col : columns)
            out += fmt::format(",{}", col[row]);
        out += "\n";
        ++row;
    }
    return out;
}

} // namespace pruneaware
