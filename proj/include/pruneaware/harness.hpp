#ifndef PRUNEAWARE_HARNESS_HPP
#define PRUNEAWARE_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <future>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pruneaware/data.hpp"
#include "pruneaware/frae.hpp"
#include "pruneaware/objective.hpp"
#include "pruneaware/pa_loss.hpp"
#include "pruneaware/spsa.hpp"

namespace pruneaware
{

/// Where training and evaluation patterns come from. A non-empty file path
/// takes precedence over the synthetic generator.
struct DataConfig
{
    Index train_sequences = 100;
    Index test_sequences = 400;
    Index frames_per_sequence = 40;
    std::uint64_t train_seed = 1001;
    std::uint64_t test_seed = 2002;
    std::string train_file;
    std::string test_file;
};

/// The pruning-rate grid 0.05, 0.10, ..., 0.95.
std::vector<double> default_rate_grid();

struct ExperimentConfig
{
    std::vector<Scope> scopes{Scope::whole_model};
    std::vector<double> rate_grid = default_rate_grid();
    std::vector<PerturbationKind> g_kinds{PerturbationKind::linear};
    double lambda = 1.0;
    std::uint64_t reference_iterations = 20000;
    std::uint64_t pa_iterations = 1000;
    std::uint64_t finetune_iterations = 7000;
    std::uint64_t baseline_iterations = 8000;
    std::uint64_t trace_stride = 0;
    FitnessSpec fitness;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    GainSchedule gain;
    FraeConfig model;
    DataConfig data;

    /// Throws ConfigError; in particular pa + finetune must equal baseline iterations.
    void validate() const;
};

/// Parses the sectioned key=value format; absent keys keep their defaults.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Writes every field, so the output documents the full configuration.
std::string format_config(const ExperimentConfig& config);

enum class Arm
{
    pa,
    baseline
};

std::string_view to_string(Arm a);
Arm parse_arm(std::string_view s);

struct CellSpec
{
    Arm arm = Arm::pa;
    Scope scope = Scope::whole_model;
    double rate = 0.5;
    /// Ignored by the baseline arm.
    PerturbationKind g_kind = PerturbationKind::linear;
    std::uint64_t seed = 1;

    /// File stem such as "pa_whole_model_linear_r0.5_s1".
    std::string label() const;
};

struct ResultRecord
{
    CellSpec cell;
    double fitness_pre_prune = 0.0;
    double fitness_post_prune = 0.0;
    double fitness_post_finetune = 0.0;
    Index pruned_count = 0;
    /// SPSA steps actually taken in the pruning-aware and fine-tuning phases.
    std::uint64_t pa_steps = 0;
    std::uint64_t finetune_steps = 0;
    /// Empty on success.
    std::string error;

    std::uint64_t total_steps() const noexcept { return pa_steps + finetune_steps; }
    bool ok() const noexcept { return error.empty(); }
};

/// Shared state of one experiment: configuration, the two datasets and one
/// reference model per seed. References are cached in `output_dir` (when
/// given) as reference_s<seed>.frae and reused on later runs.
class ExperimentContext
{
  public:
    explicit ExperimentContext(ExperimentConfig config, std::optional<std::filesystem::path> output_dir = std::nullopt);

    const ExperimentConfig& config() const noexcept { return config_; }
    const Dataset& train() const noexcept { return train_; }
    const Dataset& test() const noexcept { return test_; }
    const std::optional<std::filesystem::path>& output_dir() const noexcept { return output_dir_; }

    /// Base fitness on the training set (the optimization target).
    Fitness train_fitness() const;
    /// Fitness on the held-out set (what records report).
    Fitness test_fitness() const;

    /// Reference model for `seed`: fresh init with `seed`, then plain SPSA for
    /// reference_iterations. Thread-safe; trained at most once per seed.
    const FraeModel& reference(std::uint64_t seed);

    std::filesystem::path reference_path(std::uint64_t seed) const;

  private:
    ExperimentConfig config_;
    std::optional<std::filesystem::path> output_dir_;
    Dataset train_;
    Dataset test_;
    FraeModel architecture_;
    std::mutex mutex_;
    std::map<std::uint64_t, std::shared_future<FraeModel>> reference_futures_;
};

/// Seed of the SPSA perturbation stream for a cell; distinct per arm, scope,
/// rate, perturbation function and seed.
std::uint64_t cell_stream_seed(const CellSpec& cell);

/// Pruning-aware training for pa_iterations with the schedule tied to the cell,
/// magnitude pruning of the result, then masked fine-tuning for
/// finetune_iterations continuing the same gain sequence.
/// With an output directory, writes <label>.pruned.frae, <label>.final.frae
/// and <label>.mask under output_dir/cells.
/// With `finetune` false the run stops after pruning; the fine-tuned fitness
/// is then NaN and finetune_steps is 0.
ResultRecord run_pa_arm(ExperimentContext& ctx, const CellSpec& cell, bool finetune = true);

/// Magnitude pruning of the reference model, then masked fine-tuning for
/// baseline_iterations.
ResultRecord run_baseline_arm(ExperimentContext& ctx, const CellSpec& cell, bool finetune = true);

/// Dispatches on cell.arm; exceptions become a record with `error` set.
ResultRecord run_cell(ExperimentContext& ctx, const CellSpec& cell, bool finetune = true);

/// Every cell of the sweep in output order: per seed, scope and rate one
/// baseline cell followed by one pruning-aware cell per perturbation function.
std::vector<CellSpec> sweep_cells(const ExperimentConfig& config);

struct SweepResult
{
    std::vector<ResultRecord> records;
    std::size_t failed = 0;
};

/// Runs all cells (on `jobs` worker threads) and, with an output directory,
/// writes results.csv and every figure whose series are complete.
SweepResult sweep(ExperimentContext& ctx, unsigned jobs = 1, std::ostream* log = nullptr, bool finetune = true);

void write_results_csv(std::ostream& out, const std::vector<ResultRecord>& records, std::string_view comment = {});
std::vector<ResultRecord> read_results_csv(std::istream& in);

/// Plot layouts mirroring the comparisons of the evaluation.
enum class Figure
{
    baseline_scopes,      ///< baseline post-prune, both scopes, plus reference
    whole_model_compare,  ///< baseline vs pa-linear post-prune, whole model
    decoder_only_compare, ///< baseline vs pa-linear post-prune, decoder only
    perturbation_compare, ///< baseline vs pa-{linear,square,cube}, whole model
    pre_prune,            ///< pa-linear before pruning vs reference, whole model
    finetuned             ///< post-fine-tune, both arms and scopes
};

std::string_view to_string(Figure f);
Figure parse_figure(std::string_view s);
std::vector<Figure> all_figures();

/// Thrown when a figure's series lack cells; lists every absent cell.
class MissingSeriesError : public std::runtime_error
{
  public:
    MissingSeriesError(const std::string& what, std::vector<std::string> missing)
        : std::runtime_error(what), missing_(std::move(missing))
    {
    }

    const std::vector<std::string>& missing() const noexcept { return missing_; }

  private:
    std::vector<std::string> missing_;
};

/// Names of the series a figure plots, in column order.
std::vector<std::string> figure_series(Figure figure);

/// CSV with a `rate` column and one column per series holding the median over
/// seeds of successful records. One row per rate present in the table.
std::string emit_plot_data(const std::vector<ResultRecord>& records, Figure figure);

} // namespace pruneaware

#endif
