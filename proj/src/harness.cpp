#include "leamvd/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace leamvd {
namespace fs = std::filesystem;
namespace {

constexpr std::uint64_t kSubsetStream = 1000;
constexpr double kBinarizeThreshold = 0.5;
constexpr std::array<char, 4> kCheckpointMagic{'R', 'B', 'M', '1'};

std::string format_double(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key));
  return out;
}

std::size_t parse_positive(std::string_view key, std::string_view value) {
  const auto v = parse_number<std::size_t>(key, value);
  if (v == 0) throw ConfigError(std::string(key) + " must be positive");
  return v;
}

fs::path history_path(const fs::path& dir, std::size_t layer) {
  return dir / ("history_layer" + std::to_string(layer) + ".csv");
}

fs::path checkpoint_path(const fs::path& dir, std::size_t layer) {
  return dir / ("rbm_layer" + std::to_string(layer) + ".ckpt");
}

std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void write_f64_le(std::ostream& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint64_t read_le(std::istream& in, int bytes, const fs::path& path) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == EOF) throw std::runtime_error(path.string() + ": truncated checkpoint");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

void write_aggregate_csv(const fs::path& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out = open_output(path);
  out << "generation,runs,mean,median,min,max\n";
  for (const auto& r : rows)
    out << r.generation << ',' << r.runs << ',' << format_double(r.mean) << ','
        << format_double(r.median) << ',' << format_double(r.min) << ',' << format_double(r.max) << '\n';
}

}  // namespace

std::string to_string(ProfileName name) {
  switch (name) {
    case ProfileName::Small7x7: return "small7x7";
    case ProfileName::Full28x28: return "full28x28";
    case ProfileName::Synthetic: return "synthetic";
  }
  return "unknown";
}

ProfileName parse_profile(std::string_view name) {
  if (name == "small7x7") return ProfileName::Small7x7;
  if (name == "full28x28") return ProfileName::Full28x28;
  if (name == "synthetic") return ProfileName::Synthetic;
  throw ConfigError("unknown profile '" + std::string(name) +
                    "' (expected small7x7, full28x28 or synthetic)");
}

Trainer ExperimentProfile::resolved_trainer() const {
  if (trainer) return *trainer;
  return name == ProfileName::Synthetic ? Trainer::LeaMvd : Trainer::LeaMvdSeededByCd;
}

double ExperimentProfile::resolved_x_inf() const {
  return x_inf.value_or(name == ProfileName::Synthetic ? -5.0 : -0.1);
}

double ExperimentProfile::resolved_x_sup() const {
  return x_sup.value_or(name == ProfileName::Synthetic ? 5.0 : 0.1);
}

DbnSpec ExperimentProfile::dbn() const {
  switch (name) {
    case ProfileName::Small7x7: return DbnSpec::small7x7();
    case ProfileName::Full28x28: return DbnSpec::full28x28();
    case ProfileName::Synthetic: break;
  }
  throw ConfigError("the synthetic profile has no DBN");
}

void apply_setting(ExperimentProfile& p, std::string_view key, std::string_view value) {
  value = trim(value);
  try {
    if (key == "profile") p.name = parse_profile(value);
    else if (key == "trainer") p.trainer = parse_trainer(value);
    else if (key == "budget") p.budget = parse_positive(key, value);
    else if (key == "seed") p.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "data-dir") p.data_dir = std::string(value);
    else if (key == "out") p.out_dir = std::string(value);
    else if (key == "subset") p.subset = parse_number<std::size_t>(key, value);
    else if (key == "lambda") p.lambda = parse_positive(key, value);
    else if (key == "n-elite") p.n_elite = parse_positive(key, value);
    else if (key == "reps") p.reps = parse_positive(key, value);
    else if (key == "function") p.function = std::string(value);
    else if (key == "n-var") p.n_var = parse_positive(key, value);
    else if (key == "x-inf") p.x_inf = parse_number<double>(key, value);
    else if (key == "x-sup") p.x_sup = parse_number<double>(key, value);
    else if (key == "cd-learning-rate") p.cd_learning_rate = parse_number<double>(key, value);
    else if (key == "cd-minibatch") p.cd_minibatch = parse_positive(key, value);
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void apply_config_file(ExperimentProfile& profile, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string_view key = trim(text.substr(0, eq));
    if (key.starts_with("meta.")) continue;
    apply_setting(profile, key, text.substr(eq + 1));
  }
}

std::vector<std::pair<std::string, std::string>> settings_of(const ExperimentProfile& p) {
  return {
      {"profile", to_string(p.name)},
      {"trainer", to_string(p.resolved_trainer())},
      {"budget", std::to_string(p.budget)},
      {"seed", std::to_string(p.seed)},
      {"data-dir", p.data_dir.string()},
      {"out", p.out_dir.string()},
      {"subset", std::to_string(p.subset)},
      {"lambda", std::to_string(p.lambda)},
      {"n-elite", std::to_string(p.n_elite)},
      {"reps", std::to_string(p.reps)},
      {"function", p.function},
      {"n-var", std::to_string(p.n_var)},
      {"x-inf", format_double(p.resolved_x_inf())},
      {"x-sup", format_double(p.resolved_x_sup())},
      {"cd-learning-rate", format_double(p.cd_learning_rate)},
      {"cd-minibatch", std::to_string(p.cd_minibatch)},
  };
}

fs::path resolve_data_dir(const ExperimentProfile& profile) {
  if (!profile.data_dir.empty()) return profile.data_dir;
  if (const char* env = std::getenv("LEA_MVD_DATA_DIR"); env != nullptr && *env != '\0') return env;
  throw ConfigError("no data directory: pass --data-dir or set LEA_MVD_DATA_DIR");
}

Dataset load_profile_data(const ExperimentProfile& profile) {
  const fs::path dir = resolve_data_dir(profile);
  fs::path images;
  for (const char* name : {"train-images-idx3-ubyte", "train-images-idx3-ubyte.gz"}) {
    if (fs::exists(dir / name)) {
      images = dir / name;
      break;
    }
  }
  if (images.empty())
    throw ConfigError("MNIST training images not found: expected " +
                      (dir / "train-images-idx3-ubyte[.gz]").string());
  Dataset data = binarize(load_idx(images), kBinarizeThreshold);
  if (data.width != 28 || data.height != 28)
    throw ConfigError(images.string() + ": expected 28x28 images");
  if (profile.name == ProfileName::Small7x7) data = downscale_7x7(data);
  if (profile.subset > data.count())
    throw ConfigError("subset " + std::to_string(profile.subset) + " exceeds the " +
                      std::to_string(data.count()) + " available images");
  if (profile.subset > 0) data = subset(data, profile.subset, derive_seed(profile.seed, kSubsetStream));
  return data;
}

void write_history_csv(const fs::path& path, const std::vector<GenerationRecord>& history) {
  std::ofstream out = open_output(path);
  out << "generation,f_best,sigma_norm,beta1,beta2,restarted,evals_cumulative\n";
  for (const auto& r : history)
    out << r.generation << ',' << format_double(r.f_best) << ',' << format_double(r.sigma_norm) << ','
        << format_double(r.beta1) << ',' << format_double(r.beta2) << ',' << (r.restarted ? 1 : 0) << ','
        << r.evals_cumulative << '\n';
}

std::vector<double> read_history_f_best(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing history file " + path.string());
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("generation,f_best,"))
    throw ConfigError(path.string() + ": not a history CSV");
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    if (first == std::string::npos || second == std::string::npos)
      throw ConfigError(path.string() + ": malformed row '" + line + "'");
    values.push_back(parse_number<double>("f_best", std::string_view(line).substr(first + 1, second - first - 1)));
  }
  return values;
}

void write_checkpoint(const fs::path& path, const Rbm& rbm) {
  std::ofstream out = open_output(path, std::ios::binary);
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  write_u32_le(out, static_cast<std::uint32_t>(rbm.n_visible()));
  write_u32_le(out, static_cast<std::uint32_t>(rbm.n_hidden()));
  for (double v : rbm.params()) write_f64_le(out, v);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Rbm read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw std::runtime_error(path.string() + ": bad checkpoint magic");
  const auto nv = static_cast<std::size_t>(read_le(in, 4, path));
  const auto nh = static_cast<std::size_t>(read_le(in, 4, path));
  std::vector<double> params(LayerShape{nv, nh}.parameter_count());
  for (double& v : params) {
    const std::uint64_t bits = read_le(in, 8, path);
    std::memcpy(&v, &bits, sizeof v);
  }
  if (in.peek() != EOF) throw std::runtime_error(path.string() + ": trailing bytes after parameters");
  return unflatten(params, nv, nh);
}

RunSummary run_experiment(const ExperimentProfile& profile, std::ostream* log) {
  if (profile.n_elite >= profile.lambda) throw ConfigError("n-elite must be smaller than lambda");
  if (profile.resolved_x_inf() > profile.resolved_x_sup()) throw ConfigError("x-inf must not exceed x-sup");
  const Trainer trainer = profile.resolved_trainer();

  OptimizerConfig opt;
  opt.lambda = profile.lambda;
  opt.n_elite = profile.n_elite;
  opt.x_inf = profile.resolved_x_inf();
  opt.x_sup = profile.resolved_x_sup();
  opt.n_gen = profile.budget;
  opt.worst_sample_count = std::min(opt.worst_sample_count, profile.lambda - 1);

  std::vector<std::pair<std::string, std::string>> meta;
  RunSummary summary;
  std::vector<Rbm> rbms;

  if (profile.name == ProfileName::Synthetic) {
    if (trainer != Trainer::LeaMvd) throw ConfigError("the synthetic profile supports only the LEA_MVD trainer");
    ObjectiveFn objective;
    try {
      objective = synthetic_objective(profile.function, profile.n_var);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    opt.n_var = profile.n_var;
    opt.rng_seed = profile.seed;
    try {
      opt.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const RunResult result = run(opt, objective);
    summary.histories.push_back(result.history);
    summary.stop_reasons.push_back(to_string(result.stop_reason));
    meta.emplace_back("meta.optimizer_seed", std::to_string(opt.rng_seed));
    if (log) *log << "synthetic " << profile.function << ": f_best " << format_double(result.f_best) << " after "
                  << result.generations_used << " generations\n";
  } else {
    const DbnSpec spec = profile.dbn();
    const Dataset data = load_profile_data(profile);
    meta.emplace_back("meta.data_dir", resolve_data_dir(profile).string());
    meta.emplace_back("meta.data_rows", std::to_string(data.count()));
    meta.emplace_back("meta.data_provenance", data.provenance);
    meta.emplace_back("meta.binarize", "byte/255 > 0.5");
    if (profile.name == ProfileName::Small7x7)
      meta.emplace_back("meta.downscale", "4x4 block mean, >= 0.5 -> 1");
    meta.emplace_back("meta.subset_seed", std::to_string(derive_seed(profile.seed, kSubsetStream)));

    PretrainConfig pre;
    pre.trainer = trainer;
    pre.budget = profile.budget;
    pre.seed = profile.seed;
    pre.cd.learning_rate = profile.cd_learning_rate;
    pre.cd.minibatch_size = profile.cd_minibatch;
    pre.optimizer = opt;
    std::vector<LayerResult> layers;
    try {
      layers = pretrain_dbn(spec, data.images, pre, [&](std::size_t layer, const GenerationRecord& rec) {
        if (log && (rec.generation == 1 || rec.generation % 10 == 0))
          *log << "layer " << layer + 1 << " step " << rec.generation << ": error " << format_double(rec.f_best) << '\n';
      });
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& shape = spec.layers()[k];
      meta.emplace_back("meta.layer" + std::to_string(k + 1) + ".shape",
                        std::to_string(shape.n_visible) + "x" + std::to_string(shape.n_hidden));
      meta.emplace_back("meta.layer" + std::to_string(k + 1) + ".variables", std::to_string(shape.parameter_count()));
      meta.emplace_back("meta.layer" + std::to_string(k + 1) + ".seed", std::to_string(layers[k].layer_seed));
      summary.histories.push_back(layers[k].history);
      summary.stop_reasons.push_back(to_string(layers[k].stop_reason));
      rbms.push_back(std::move(layers[k].rbm));
    }
    meta.emplace_back("meta.cd", "CD-1, learning rate " + format_double(pre.cd.learning_rate) + ", minibatch " +
                                     std::to_string(pre.cd.minibatch_size) +
                                     ", weights N(0,0.01), zero biases, no momentum");
    meta.emplace_back("meta.reconstruction", "mean-field, squared error summed over the subset");
  }

  meta.emplace_back("meta.optimizer", "sigma_min_scale=" + format_double(opt.sigma_min_scale) +
                                          " stagnation_limit=" + std::to_string(opt.stagnation_limit) +
                                          " perturb_prob=" + format_double(opt.perturb_prob) +
                                          " worst_sample_count=" + std::to_string(opt.worst_sample_count) +
                                          " seed_sigma=" + format_double(opt.seed_sigma) +
                                          " reevaluate_elite=0 clamp_to_bounds=0");
  for (std::size_t k = 0; k < summary.stop_reasons.size(); ++k)
    meta.emplace_back("meta.layer" + std::to_string(k + 1) + ".stop", summary.stop_reasons[k]);

  fs::create_directories(profile.out_dir);
  for (std::size_t k = 0; k < summary.histories.size(); ++k)
    write_history_csv(history_path(profile.out_dir, k + 1), summary.histories[k]);
  for (std::size_t k = 0; k < rbms.size(); ++k) write_checkpoint(checkpoint_path(profile.out_dir, k + 1), rbms[k]);

  std::ofstream out = open_output(profile.out_dir / "run.meta");
  for (const auto& [key, value] : settings_of(profile)) out << key << " = " << value << '\n';
  for (const auto& [key, value] : meta) out << key << " = " << value << '\n';
  return summary;
}

std::vector<ComparisonRow> compare_runs(const fs::path& run_a, const fs::path& run_b) {
  auto count_layers = [](const fs::path& dir) {
    std::size_t n = 0;
    while (fs::exists(history_path(dir, n + 1))) ++n;
    return n;
  };
  const std::size_t layers_a = count_layers(run_a);
  const std::size_t layers_b = count_layers(run_b);
  if (layers_a == 0) throw ConfigError("missing history file " + history_path(run_a, 1).string());
  if (layers_b == 0) throw ConfigError("missing history file " + history_path(run_b, 1).string());
  if (layers_a != layers_b) {
    const auto& [short_dir, n] = layers_a < layers_b ? std::pair{run_a, layers_a} : std::pair{run_b, layers_b};
    throw ConfigError("layer mismatch: " + std::to_string(layers_a) + " vs " + std::to_string(layers_b) +
                      " layers; missing history file " + history_path(short_dir, n + 1).string());
  }

  std::vector<ComparisonRow> rows;
  for (std::size_t k = 1; k <= layers_a; ++k) {
    const std::vector<double> a = read_history_f_best(history_path(run_a, k));
    const std::vector<double> b = read_history_f_best(history_path(run_b, k));
    if (a.empty() || b.empty()) throw ConfigError("empty history for layer " + std::to_string(k));
    ComparisonRow row;
    row.layer = k;
    row.final_a = a.back();
    row.best_a = *std::min_element(a.begin(), a.end());
    row.final_b = b.back();
    row.best_b = *std::min_element(b.begin(), b.end());
    if (row.final_a == row.final_b) row.ratio = 1.0;
    else row.ratio = row.final_a / row.final_b;
    row.winner = row.final_a < row.final_b ? "a" : (row.final_a > row.final_b ? "b" : "tie");
    rows.push_back(row);
  }
  return rows;
}

void print_comparison(std::ostream& out, const std::vector<ComparisonRow>& rows, bool csv,
                      const std::string& label_a, const std::string& label_b) {
  if (csv) {
    out << "layer,final_a,best_a,final_b,best_b,ratio,winner\n";
    for (const auto& r : rows)
      out << r.layer << ',' << format_double(r.final_a) << ',' << format_double(r.best_a) << ','
          << format_double(r.final_b) << ',' << format_double(r.best_b) << ',' << format_double(r.ratio) << ','
          << r.winner << '\n';
    return;
  }
  out << "a: " << label_a << "\nb: " << label_b << "\n";
  out << std::left << std::setw(6) << "layer" << std::right << std::setw(14) << "final_a" << std::setw(14)
      << "best_a" << std::setw(14) << "final_b" << std::setw(14) << "best_b" << std::setw(10) << "a/b"
      << std::setw(8) << "winner" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(6) << r.layer << std::right << std::setprecision(6) << std::setw(14)
        << r.final_a << std::setw(14) << r.best_a << std::setw(14) << r.final_b << std::setw(14) << r.best_b
        << std::setprecision(4) << std::setw(10) << r.ratio << std::setw(8) << r.winner << '\n';
  }
}

std::vector<AggregateRow> aggregate_histories(const std::vector<std::vector<GenerationRecord>>& runs) {
  std::size_t longest = 0;
  for (const auto& h : runs) longest = std::max(longest, h.size());
  std::vector<AggregateRow> rows;
  std::vector<double> values;
  for (std::size_t g = 0; g < longest; ++g) {
    values.clear();
    for (const auto& h : runs)
      if (g < h.size()) values.push_back(h[g].f_best);
    std::sort(values.begin(), values.end());
    AggregateRow row;
    row.generation = g + 1;
    for (const auto& h : runs)
      if (g < h.size()) row.generation = h[g].generation;
    row.runs = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    row.mean = sum / static_cast<double>(values.size());
    const std::size_t mid = values.size() / 2;
    row.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    row.min = values.front();
    row.max = values.back();
    rows.push_back(row);
  }
  return rows;
}

std::vector<RunSummary> run_batch(const ExperimentProfile& profile, std::size_t repetitions, std::ostream* log) {
  if (repetitions == 0) throw ConfigError("reps must be at least 1");
  std::vector<RunSummary> summaries;
  for (std::size_t i = 0; i < repetitions; ++i) {
    ExperimentProfile rep = profile;
    rep.seed = profile.seed + i;
    rep.reps = 1;
    std::ostringstream name;
    name << "rep_" << std::setw(3) << std::setfill('0') << i;
    rep.out_dir = profile.out_dir / name.str();
    if (log) *log << "repetition " << i + 1 << "/" << repetitions << " (seed " << rep.seed << ")\n";
    summaries.push_back(run_experiment(rep, log));
  }

  const std::size_t layers = summaries.front().histories.size();
  for (std::size_t k = 0; k < layers; ++k) {
    std::vector<std::vector<GenerationRecord>> per_layer;
    for (const auto& s : summaries) per_layer.push_back(s.histories[k]);
    write_aggregate_csv(profile.out_dir / ("aggregate_layer" + std::to_string(k + 1) + ".csv"),
                        aggregate_histories(per_layer));
  }
  std::ofstream meta = open_output(profile.out_dir / "batch.meta");
  for (const auto& [key, value] : settings_of(profile))
    meta << key << " = " << (key == "reps" ? std::to_string(repetitions) : value) << '\n';
  meta << "meta.rep_seeds = seed + i for i in [0, " << repetitions << ")\n";
  return summaries;
}

}  // namespace leamvd
