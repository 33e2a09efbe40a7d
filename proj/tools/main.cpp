// Command-line front end: invariant verification, cost/sweep CSV emission,
// ERF heatmaps, and the shape/texture dimensionality probe.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lska/analysis.hpp"
#include "lska/attention.hpp"
#include "lska/backbone.hpp"
#include "lska/bench.hpp"
#include "lska/cost.hpp"
#include "lska/io.hpp"
#include "lska/rng.hpp"
#include "lska/verify.hpp"

namespace {

constexpr int kExitVerifyFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

using nlohmann::json;

// Flag values shared by the subcommands. A --config JSON file overrides
// whatever was given on the command line.
struct Options {
  std::string config_path;
  std::string variant;
  std::vector<std::string> variants;
  int k = 0;
  std::vector<int> ks;
  std::optional<int> d;
  std::vector<int> ds;
  std::optional<int> channels;
  std::string capacity;
  int hw = 224;
  int num_classes = 1000;
  uint64_t seed = 0;
  int n_inputs = 4;
  int reps = 50;
  bool bench = false;
  std::string out;
  std::string filter;
  bool inject_vjp_fault = false;
  std::string input_dir;
  int latent_dim = 0;
};

void apply_config(Options& o) {
  if (o.config_path.empty()) return;
  json cfg;
  try {
    cfg = json::parse(lska::read_file(o.config_path));
  } catch (const json::parse_error& e) {
    throw lska::ConfigError(o.config_path + ": " + e.what());
  }
  if (!cfg.is_object()) throw lska::ConfigError(o.config_path + ": expected a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    if (key == "variant") {
      o.variant = value.get<std::string>();
    } else if (key == "variants") {
      o.variants = value.get<std::vector<std::string>>();
    } else if (key == "k") {
      o.k = value.get<int>();
    } else if (key == "ks") {
      o.ks = value.get<std::vector<int>>();
    } else if (key == "d") {
      o.d = value.get<int>();
    } else if (key == "channels") {
      o.channels = value.get<int>();
    } else if (key == "capacity") {
      o.capacity = value.get<std::string>();
    } else if (key == "hw") {
      o.hw = value.get<int>();
    } else if (key == "num_classes") {
      o.num_classes = value.get<int>();
    } else if (key == "seed") {
      o.seed = value.get<uint64_t>();
    } else if (key == "n_inputs") {
      o.n_inputs = value.get<int>();
    } else if (key == "reps") {
      o.reps = value.get<int>();
    } else {
      throw lska::ConfigError(o.config_path + ": unknown key '" + key + "'");
    }
  }
}

lska::AttentionVariant parse_variant(const std::string& name) {
  const auto v = lska::variant_from_string(name);
  if (!v) throw lska::ConfigError("unknown variant '" + name + "'");
  return *v;
}

lska::Capacity parse_capacity(const std::string& name) {
  const auto c = lska::capacity_from_string(name);
  if (!c) throw lska::ConfigError("unknown capacity '" + name + "'");
  return *c;
}

int resolve_dilation(int k, std::optional<int> d) {
  if (d) return *d;
  const auto looked_up = lska::dilation_for_kernel(k);
  if (!looked_up) {
    throw lska::ConfigError("no default dilation for k=" + std::to_string(k) +
                            "; pass --d explicitly");
  }
  return *looked_up;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    lska::write_file(out_path, content);
  }
}

int cmd_verify(const Options& o) {
  lska::VerifyOptions vopts;
  vopts.filter = o.filter;
  vopts.corrupt_vjp = o.inject_vjp_fault;
  const std::vector<lska::PropertyResult> results = lska::run_verification(vopts);
  if (results.empty()) {
    std::cerr << "error: no properties match filter '" << o.filter << "'\n";
    return kExitUsage;
  }
  std::string first_failure;
  for (const lska::PropertyResult& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << " " << r.name << ": " << r.detail << "\n";
    if (!r.pass && first_failure.empty()) first_failure = r.name;
  }
  if (!first_failure.empty()) {
    std::cerr << "first failing property: " << first_failure << "\n";
    return kExitVerifyFailure;
  }
  return 0;
}

int cmd_cost(const Options& o) {
  if (o.channels.has_value() == !o.capacity.empty()) {
    throw lska::ConfigError("pass exactly one of --channels or --capacity");
  }
  const lska::AttentionVariant variant = parse_variant(o.variant);
  const lska::KernelSpec spec{o.k, resolve_dilation(o.k, o.d)};

  lska::SweepRow row;
  row.variant = std::string(lska::to_string(variant));
  row.k = spec.k;
  row.d = spec.d;
  row.seed = o.seed;
  if (o.channels) {
    row.channels_or_capacity = std::to_string(*o.channels);
    row.params = lska::attention_params_analytic(variant, spec, *o.channels);
    row.macs = lska::attention_flops_analytic(variant, spec, *o.channels, o.hw, o.hw);
  } else {
    const lska::ModelConfig cfg = lska::ModelConfig::make(parse_capacity(o.capacity), variant,
                                                          spec, o.num_classes, o.seed);
    const lska::CostReport report = lska::model_cost(cfg, o.hw, o.hw);
    row.channels_or_capacity = o.capacity;
    row.params = report.params;
    row.macs = report.macs;
  }
  row.gflops = static_cast<double>(row.macs) / 1e9;
  emit(o.out, lska::sweep_csv({row}));
  return 0;
}

int cmd_sweep(Options o) {
  if (o.variants.empty()) o.variants = {"lka-trivial", "lska-trivial", "lka", "lska"};
  if (o.ks.empty()) o.ks = {7, 11, 23, 35, 53, 65};
  if (o.capacity.empty()) o.capacity = "tiny";
  const lska::Capacity capacity = parse_capacity(o.capacity);
  if (!o.ds.empty() && o.ds.size() != o.ks.size()) {
    throw lska::ConfigError("--d list must match --k list (" + std::to_string(o.ds.size()) +
                            " vs " + std::to_string(o.ks.size()) + ")");
  }

  std::vector<lska::SweepRow> rows;
  uint64_t index = 0;
  for (const std::string& vname : o.variants) {
    const lska::AttentionVariant variant = parse_variant(vname);
    for (size_t i = 0; i < o.ks.size(); ++i) {
      const int k = o.ks[i];
      const lska::KernelSpec spec{
          k, o.ds.empty() ? resolve_dilation(k, std::nullopt) : o.ds[i]};
      const uint64_t row_seed = o.seed + index++;

      lska::SweepRow row;
      row.variant = std::string(lska::to_string(variant));
      row.k = spec.k;
      row.d = spec.d;
      row.channels_or_capacity = std::string(lska::to_string(capacity));
      row.seed = row_seed;

      const lska::ModelConfig cfg =
          lska::ModelConfig::make(capacity, variant, spec, o.num_classes, row_seed);
      const lska::CostReport report = lska::model_cost(cfg, o.hw, o.hw);
      row.params = report.params;
      row.macs = report.macs;
      row.gflops = static_cast<double>(row.macs) / 1e9;

      if (o.bench) {
        // Wall time of the bare attention module at the stage-1 width.
        const lska::AttentionModule mod =
            lska::build_attention(variant, spec, cfg.stages[0].channels, row_seed);
        lska::Rng rng(row_seed);
        const lska::Tensor input =
            lska::random_uniform(lska::Dims{1, mod.channels, o.hw, o.hw}, rng);
        const lska::TimingStats stats =
            lska::time_callable([&] { mod.forward(input); }, o.reps);
        row.wall_ms_mean = stats.mean_ms;
        row.wall_ms_stddev = stats.stddev_ms;
        row.reps = stats.reps;
      }
      rows.push_back(std::move(row));
    }
  }
  emit(o.out, lska::sweep_csv(std::move(rows)));
  return 0;
}

int cmd_erf(Options o) {
  if (o.capacity.empty()) o.capacity = "tiny";
  if (o.variant.empty()) o.variant = "lska";
  const lska::AttentionVariant variant = parse_variant(o.variant);
  const lska::KernelSpec spec{o.k, resolve_dilation(o.k, o.d)};
  const lska::ModelConfig cfg = lska::ModelConfig::make(parse_capacity(o.capacity), variant,
                                                        spec, o.num_classes, o.seed);
  const lska::VanModel model = lska::build_van(cfg);
  const lska::ErfMap map = lska::compute_erf_random(model, o.n_inputs, o.hw, o.seed);

  // Render everything before touching the filesystem.
  const std::string pgm = lska::pgm_bytes(map);
  const std::string values = lska::erf_values_csv(map);
  const std::string radii = lska::erf_radius_csv(map, o.seed);
  lska::write_file(o.out + ".pgm", pgm);
  lska::write_file(o.out + "_values.csv", values);
  lska::write_file(o.out + "_radius.csv", radii);
  return 0;
}

int cmd_probe(const Options& o) {
  const std::string names[] = {"shape_a", "shape_b", "texture_a", "texture_b"};
  std::vector<lska::Matrix> mats;
  for (const std::string& name : names) {
    const std::string path = o.input_dir + "/" + name + ".csv";
    lska::Matrix m = lska::read_csv_matrix(path);
    if (o.latent_dim > 0 && m.cols != o.latent_dim) {
      throw lska::ConfigError(path + ": expected " + std::to_string(o.latent_dim) +
                              " columns, got " + std::to_string(m.cols));
    }
    if (!mats.empty() && m.cols != mats.front().cols) {
      throw lska::ConfigError(path + ": column count " + std::to_string(m.cols) +
                              " does not match shape_a's " + std::to_string(mats.front().cols));
    }
    mats.push_back(std::move(m));
  }
  const lska::ProbeReport report = lska::run_probe(mats[0], mats[1], mats[2], mats[3]);

  std::string csv = "factor,score,dimensionality,percent_of_n\n";
  const char* factors[] = {"shape", "texture", "residual"};
  for (int i = 0; i < 3; ++i) {
    csv += factors[i];
    csv += ',' + lska::format_double(report.scores[static_cast<size_t>(i)]);
    csv += ',' + lska::format_double(report.dimensionalities[static_cast<size_t>(i)]);
    csv += ',' +
           lska::format_double(report.dimensionalities[static_cast<size_t>(i)] /
                               report.latent_dim * 100.0);
    csv += '\n';
  }
  emit(o.out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"large separable kernel attention toolkit"};
  app.require_subcommand(1);

  auto add_config = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "JSON config overriding the flags");
  };

  CLI::App* verify = app.add_subcommand("verify", "run the invariant suite");
  verify->add_option("--filter", o.filter, "only properties whose name contains this");
  verify->add_flag("--inject-vjp-fault", o.inject_vjp_fault)->group("");
  add_config(verify);

  CLI::App* cost = app.add_subcommand("cost", "one analytic cost row");
  cost->add_option("--variant", o.variant, "lka-trivial|lska-trivial|lka|lska")->required();
  cost->add_option("--k", o.k, "kernel size (maximum receptive field)")->required();
  cost->add_option("--d", o.d, "dilation (default: built-in pairing)");
  cost->add_option("--channels", o.channels, "module-level at this channel width");
  cost->add_option("--capacity", o.capacity, "model-level: tiny|small|base");
  cost->add_option("--hw", o.hw, "input height=width (default 224)");
  cost->add_option("--num-classes", o.num_classes, "classifier width (default 1000)");
  cost->add_option("--seed", o.seed, "seed column value");
  cost->add_option("--out", o.out, "output CSV path (default stdout)");
  add_config(cost);

  CLI::App* sweep = app.add_subcommand("sweep", "cost grid over variants and kernels");
  sweep->add_option("--variants", o.variants, "variant list (default: all four)");
  sweep->add_option("--ks", o.ks, "kernel list (default: 7 11 23 35 53 65)");
  sweep->add_option("--ds", o.ds, "dilation list parallel to --ks (default: built-in pairing)");
  sweep->add_option("--capacity", o.capacity, "tiny|small|base (default tiny)");
  sweep->add_option("--hw", o.hw, "input height=width (default 224)");
  sweep->add_option("--num-classes", o.num_classes, "classifier width (default 1000)");
  sweep->add_option("--seed", o.seed, "base seed; row i uses seed+i");
  sweep->add_flag("--bench", o.bench, "time the attention module forward per row");
  sweep->add_option("--reps", o.reps, "timed repetitions per row (default 50)");
  sweep->add_option("--out", o.out, "output CSV path (default stdout)");
  add_config(sweep);

  CLI::App* erf = app.add_subcommand("erf", "effective receptive field heatmap");
  erf->add_option("--capacity", o.capacity, "tiny|small|base (default tiny)");
  erf->add_option("--variant", o.variant, "attention variant (default lska)");
  erf->add_option("--k", o.k, "kernel size")->required();
  erf->add_option("--d", o.d, "dilation (default: built-in pairing)");
  erf->add_option("--n-inputs", o.n_inputs, "random inputs to aggregate (default 4)");
  erf->add_option("--hw", o.hw, "input height=width (default 224)");
  erf->add_option("--seed", o.seed, "model and input seed");
  erf->add_option("--out", o.out, "output prefix: <out>.pgm, <out>_values.csv, <out>_radius.csv")
      ->required();
  add_config(erf);

  CLI::App* probe = app.add_subcommand("probe", "shape/texture dimensionality probe");
  probe->add_option("--input-dir", o.input_dir,
                    "directory with shape_a/shape_b/texture_a/texture_b CSVs")
      ->required();
  probe->add_option("--latent-dim", o.latent_dim, "expected latent width N (0 = infer)");
  probe->add_option("--out", o.out, "output CSV path (default stdout)");
  add_config(probe);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    apply_config(o);
    if (verify->parsed()) return cmd_verify(o);
    if (cost->parsed()) return cmd_cost(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (erf->parsed()) return cmd_erf(o);
    if (probe->parsed()) return cmd_probe(o);
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const lska::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
