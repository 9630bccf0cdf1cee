#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "leamvd/dataio.hpp"
#include "leamvd/optimizer.hpp"
#include "leamvd/rbm.hpp"

namespace leamvd {

/// Bad or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProfileName { Small7x7, Full28x28, Synthetic };

std::string to_string(ProfileName name);
ProfileName parse_profile(std::string_view name);

/// Everything needed to reproduce one run. Field names map one-to-one onto
/// config keys and CLI flags (`n_elite` <-> `n-elite`).
struct ExperimentProfile {
  ProfileName name = ProfileName::Small7x7;
  std::optional<Trainer> trainer;  // unset: LEA_MVD_seeded_by_CD, or LEA_MVD for synthetic
  std::size_t budget = 50;
  std::uint64_t seed = 1;
  std::filesystem::path data_dir;  // empty: $LEA_MVD_DATA_DIR
  std::filesystem::path out_dir = "run";
  std::size_t subset = 2000;       // 0: every image
  std::size_t lambda = 24;
  std::size_t n_elite = 4;
  std::size_t reps = 1;
  std::string function = "sphere";
  std::size_t n_var = 1000;
  std::optional<double> x_inf;     // unset: -0.1 (RBM) / -5 (synthetic)
  std::optional<double> x_sup;     // unset:  0.1 (RBM) /  5 (synthetic)
  double cd_learning_rate = 0.1;
  std::size_t cd_minibatch = 100;

  Trainer resolved_trainer() const;
  double resolved_x_inf() const;
  double resolved_x_sup() const;
  DbnSpec dbn() const;  // throws ConfigError for the synthetic profile
};

/// Applies one `key = value` setting. Keys are the long flag names without
/// dashes ("n-elite", "data-dir", ...). Throws ConfigError.
void apply_setting(ExperimentProfile& profile, std::string_view key, std::string_view value);

/// Flat `key = value` file; blank lines and `#` comments are skipped, keys
/// under `meta.` are informational and ignored so run.meta can be replayed.
void apply_config_file(ExperimentProfile& profile, const std::filesystem::path& path);

/// All settings as config lines (the non-meta part of run.meta).
std::vector<std::pair<std::string, std::string>> settings_of(const ExperimentProfile& profile);

std::filesystem::path resolve_data_dir(const ExperimentProfile& profile);

/// Loads the MNIST training images for the profile: binarized, downscaled
/// for small7x7, then the seeded subset.
Dataset load_profile_data(const ExperimentProfile& profile);

struct RunSummary {
  std::vector<std::vector<GenerationRecord>> histories;  // one per layer
  std::vector<std::string> stop_reasons;
};

/// Runs the profile and writes into profile.out_dir:
///   history_layer{k}.csv  (k from 1)
///   rbm_layer{k}.ckpt     (RBM profiles)
///   run.meta
/// Progress lines go to `log` when given.
RunSummary run_experiment(const ExperimentProfile& profile, std::ostream* log = nullptr);

void write_history_csv(const std::filesystem::path& path, const std::vector<GenerationRecord>& history);
/// f_best column of a history CSV, one entry per row.
std::vector<double> read_history_f_best(const std::filesystem::path& path);

void write_checkpoint(const std::filesystem::path& path, const Rbm& rbm);
Rbm read_checkpoint(const std::filesystem::path& path);

struct ComparisonRow {
  std::size_t layer = 0;
  double final_a = 0.0;
  double best_a = 0.0;
  double final_b = 0.0;
  double best_b = 0.0;
  double ratio = 1.0;  // final_a / final_b
  std::string winner;  // "a", "b" or "tie"
};

/// Per-layer comparison of two run directories. Throws ConfigError on a
/// missing history file (naming it) or differing layer counts.
std::vector<ComparisonRow> compare_runs(const std::filesystem::path& run_a,
                                        const std::filesystem::path& run_b);
void print_comparison(std::ostream& out, const std::vector<ComparisonRow>& rows, bool csv,
                      const std::string& label_a, const std::string& label_b);

struct AggregateRow {
  std::size_t generation = 0;
  std::size_t runs = 0;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Per-generation statistics of f_best across histories of unequal length.
std::vector<AggregateRow> aggregate_histories(const std::vector<std::vector<GenerationRecord>>& runs);

/// Repetition i runs with seed profile.seed + i into out_dir/rep_NNN, then
/// writes out_dir/aggregate_layer{k}.csv for every layer.
std::vector<RunSummary> run_batch(const ExperimentProfile& profile, std::size_t repetitions,
                                  std::ostream* log = nullptr);

}  // namespace leamvd
