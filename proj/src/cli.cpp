#include "pmfrec/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>

#include "pmfrec/benchmark.hpp"
#include "pmfrec/evaluation.hpp"
#include "pmfrec/inference.hpp"
#include "pmfrec/io.hpp"
#include "pmfrec/methods.hpp"
#include "pmfrec/synth.hpp"

namespace pmfrec {
namespace {

// Either the --out file or the fallback stream.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback), path_(path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ConfigError("cannot write " + path);
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }
  void close() {
    if (file_) {
      file_->close();
      if (!*file_) throw ConfigError("error writing " + path_);
    }
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
  std::string path_;
};

struct IterFlags {
  std::optional<int> max_iters;
  std::optional<double> tol;
  int inner_iters = 10;
  double init_mix = OptConfig{}.init_mix;

  void add(CLI::App* app) {
    app->add_option("--max-iters", max_iters, "Iteration cap for OPT and EM (default 200 / 100)");
    app->add_option("--tol", tol, "Relative-change stopping tolerance (default 1e-6)");
    app->add_option("--inner-iters", inner_iters, "Mirror-descent steps per block update")
        ->capture_default_str();
    app->add_option("--init-mix", init_mix, "Uniform weight mixed into the OPT starting point")
        ->capture_default_str();
  }
  OptConfig opt() const {
    OptConfig c;
    if (max_iters) c.max_outer_iters = *max_iters;
    if (tol) c.rel_tol = *tol;
    c.inner_md_iters = inner_iters;
    c.init_mix = init_mix;
    return c;
  }
  EmConfig em() const {
    EmConfig c;
    if (max_iters) c.max_iters = *max_iters;
    if (tol) c.rel_tol = *tol;
    return c;
  }
};

std::string join_warning(const std::vector<Index>& cols) {
  std::string s;
  for (std::size_t i = 0; i < cols.size() && i < 10; ++i) {
    s += (i ? " " : "") + std::to_string(cols[i] + 1);
  }
  if (cols.size() > 10) s += " ...";
  return s;
}

// --- synth -------------------------------------------------------------

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
};

void cmd_synth(const SynthArgs& a, std::ostream& err) {
  if (a.out.empty()) throw ConfigError("synth needs --out <prefix>");
  a.cfg.validate();
  FactorModeld model = gen_model(a.cfg);
  if (a.cfg.eps) {
    PlantResult<double> planted = plant_separability(model, a.cfg.split, *a.cfg.eps, a.cfg.seed);
    model = std::move(planted.model);
    char buf[96];
    std::snprintf(buf, sizeof buf, "planted separability: measured eps = %.6g\n",
                  planted.measured_eps);
    err << buf;
  }
  const SampleTable data =
      sample_data(model, a.cfg.num_samples, a.cfg.obs_prob, derive_seed(a.cfg.seed, 1));
  save_model(a.out + ".model", model);
  save_samples_csv(a.out + ".csv", data);
}

// --- fit ---------------------------------------------------------------

struct FitArgs {
  std::string input;
  std::string marginals_from;
  std::string method = "spa";
  Index rank = 0;
  std::optional<Index> split;
  std::vector<Index> alphabet;
  std::uint64_t seed = 0;
  IterFlags iters;
  std::string out;
  std::string report;
  bool record_time = false;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(a.method);
  if (a.input.empty() && a.marginals_from.empty()) {
    throw ConfigError("fit needs --input <samples.csv> or --marginals-from <model>");
  }
  if (a.rank < 1) throw ConfigError("--rank must be positive");
  std::optional<SampleTable> data;
  if (!a.input.empty()) data = load_samples_csv(a.input, a.alphabet);
  PairwiseSetd pairs = a.marginals_from.empty()
                           ? estimate_pairwise(*data)
                           : pairwise_set_from_model(load_model(a.marginals_from));
  if (data && data->alphabet_sizes() != pairs.alphabet_sizes()) {
    throw DataError("sample alphabet sizes do not match the marginals model");
  }
  const Index n_vars = static_cast<Index>(pairs.alphabet_sizes().size());
  MethodSettings settings;
  settings.rank = a.rank;
  settings.split = a.split.value_or(default_split(n_vars));
  settings.opt = a.iters.opt();
  settings.em = a.iters.em();
  settings.seed = a.seed;

  MethodOutcome result = run_method(method, pairs, data ? &*data : nullptr, settings);
  if (result.spa && !result.spa->dropped_columns.empty()) {
    err << "warning: dropped " << result.spa->dropped_columns.size()
        << " virtual-matrix column(s) with no mass: " << join_warning(result.spa->dropped_columns)
        << '\n';
  }
  if (result.spa && !result.spa->nnls_converged) {
    err << "warning: nonnegative least squares did not converge; using best iterate\n";
  }
  for (const auto& w : result.report.warnings) err << "warning: " << w << '\n';
  if (result.report.eta) {
    char buf[160];
    if (result.spa) {
      std::snprintf(buf, sizeof buf, "eta %.6g, spa condition number %.6g, prior residual %.3g\n",
                    *result.report.eta, result.spa->condition_number, result.spa->prior_residual);
    } else {
      std::snprintf(buf, sizeof buf, "eta %.6g\n", *result.report.eta);
    }
    err << buf;
  }

  Output model_out(a.out, out);
  write_model(*model_out, result.model);
  model_out.close();
  if (!a.report.empty()) {
    Output rep(a.report, out);
    write_report_csv(*rep, result.report,
                     result.trace_name.empty() ? "value" : result.trace_name, a.record_time);
    rep.close();
  }
  if (!result.report.failure.empty()) {
    err << "error: " << result.report.failure << " (best iterate written)\n";
    return kExitNumerical;
  }
  return kExitOk;
}

// --- eval --------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string truth;
  std::string input;
  std::string out;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.model.empty()) throw ConfigError("eval needs --model");
  const FactorModeld est = load_model(a.model);
  std::string mse_s, mre_s, ll_s;
  if (!a.truth.empty()) {
    const FactorModeld truth = load_model(a.truth);
    if (truth.alphabet_sizes() != est.alphabet_sizes() || truth.rank() != est.rank()) {
      throw DataError("model and truth differ in shape");
    }
    mse_s = format_double(mse(truth, est));
    if (joint_cell_count(truth.alphabet_sizes()) <= static_cast<double>(kDefaultCellBudget)) {
      mre_s = format_double(mre(truth, est));
    }
  }
  if (!a.input.empty()) {
    const SampleTable data = load_samples_csv(a.input);
    ll_s = format_double(log_likelihood(est, data));
  }
  if (a.truth.empty() && a.input.empty()) throw ConfigError("eval needs --truth and/or --input");
  Output o(a.out, out);
  *o << "mse,mre,log_likelihood\n" << mse_s << ',' << mre_s << ',' << ll_s << '\n';
  o.close();
}

// --- predict -----------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string input;
  std::string target;
  std::string mode = "map";
  std::string out;
};

Index resolve_target(const std::string& target, const SampleTable& data) {
  if (target.empty()) throw ConfigError("predict needs --target <column name or 1-based index>");
  const auto& names = data.names();
  for (Index n = 0; n < data.num_vars(); ++n) {
    if (names[static_cast<std::size_t>(n)] == target) return n;
  }
  char* end = nullptr;
  const long v = std::strtol(target.c_str(), &end, 10);
  if (*end == '\0' && v >= 1 && v <= data.num_vars()) return v - 1;
  throw ConfigError("unknown target column '" + target + "'");
}

void cmd_predict(const PredictArgs& a, std::ostream& out) {
  if (a.model.empty() || a.input.empty()) throw ConfigError("predict needs --model and --input");
  if (a.mode != "map" && a.mode != "mmse") throw ConfigError("--mode must be map or mmse");
  const FactorModeld model = load_model(a.model);
  const SampleTable data = load_samples_csv(a.input);
  if (data.num_vars() != model.num_vars()) {
    throw DataError("sample CSV has " + std::to_string(data.num_vars()) +
                    " columns but the model has " + std::to_string(model.num_vars()) +
                    " variables");
  }
  const Index target = resolve_target(a.target, data);
  Output o(a.out, out);
  *o << "row,observed,prediction\n";
  for (Index s = 0; s < data.num_samples(); ++s) {
    Evidence ev;
    for (Index n = 0; n < data.num_vars(); ++n) {
      if (n != target && data.observed(s, n)) ev[n] = data(s, n);
    }
    *o << s + 1 << ',';
    if (data.observed(s, target)) *o << data(s, target) + 1;
    *o << ',';
    if (a.mode == "map") {
      *o << predict_map(model, target, ev) + 1;
    } else {
      *o << format_double(predict_mmse(model, target, ev));
    }
    *o << '\n';
  }
  o.close();
}

// --- benchmark ---------------------------------------------------------

struct BenchArgs {
  BenchmarkConfig cfg;
  std::string methods = "spa";
  IterFlags iters;
  std::string out;
  bool record_time = false;
};

void cmd_benchmark(BenchArgs& a, std::ostream& out) {
  a.cfg.methods = parse_methods(a.methods);
  a.cfg.opt = a.iters.opt();
  a.cfg.em = a.iters.em();
  const std::vector<BenchmarkRow> rows = run_benchmark(a.cfg);
  Output o(a.out, out);
  write_benchmark_csv(*o, rows, a.record_time);
  o.close();
}

void add_config(CLI::App* app) {
  // Only listed for --help; expand_config consumes the flag before parsing.
  app->add_option("--config", "Flat 'key = value' file; command-line flags take precedence");
}

// CLI11 reads config files only for the top-level app, so a subcommand's
// --config file is turned into "--key=value" flags placed right after the
// subcommand name. Options keep their last value, so explicit flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::vector<std::string> files;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 == args.size()) throw CLI::ArgumentMismatch("--config needs a file name");
      files.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      files.push_back(args[i].substr(9));
    } else {
      rest.push_back(args[i]);
    }
  }
  if (files.empty()) return rest;
  const auto sub = std::find_if(rest.begin(), rest.end(),
                                [](const std::string& a) { return a.empty() || a[0] != '-'; });
  if (sub == rest.end()) throw CLI::ArgumentMismatch("--config must follow a subcommand");
  std::vector<std::string> flags;
  for (const std::string& file : files) {
    for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(file)) {
      if (!item.parents.empty() || item.name.empty()) {
        throw CLI::ConversionError("config file " + file + ": sections are not supported");
      }
      std::string value;
      for (const std::string& v : item.inputs) value += (value.empty() ? "" : ",") + v;
      flags.push_back("--" + item.name + "=" + value);
    }
  }
  rest.insert(sub + 1, flags.begin(), flags.end());
  return rest;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint PMF recovery from pairwise marginals", "pmfrec"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  SynthArgs synth;
  CLI::App* s = app.add_subcommand("synth", "Draw a random model and samples from it");
  add_config(s);
  s->add_option("--vars", synth.cfg.num_vars, "Number of variables N")->capture_default_str();
  s->add_option("--rank", synth.cfg.rank, "Latent rank F")->capture_default_str();
  s->add_option("--alphabet", synth.cfg.alphabet_sizes, "Alphabet size(s), one or one per variable")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  s->add_option("--samples", synth.cfg.num_samples, "Number of samples S")->capture_default_str();
  s->add_option("--obs-prob", synth.cfg.obs_prob, "Probability a cell is observed")
      ->capture_default_str();
  s->add_option("--eps", synth.cfg.eps, "Plant eps-separable rows in the second split block");
  s->add_option("--split", synth.cfg.split, "Split size M used for planting")->capture_default_str();
  s->add_option("--seed", synth.cfg.seed, "Random seed")->capture_default_str();
  s->add_option("--out", synth.out, "Output prefix; writes <prefix>.model and <prefix>.csv");

  FitArgs fit;
  CLI::App* f = app.add_subcommand("fit", "Estimate a model from samples or exact marginals");
  add_config(f);
  f->add_option("--input", fit.input, "Sample CSV");
  f->add_option("--marginals-from", fit.marginals_from,
                "Use the exact pairwise marginals of this model instead of samples");
  f->add_option("--method", fit.method, "spa, opt, em, spa-em or spa-opt")->capture_default_str();
  f->add_option("--rank", fit.rank, "Latent rank F");
  f->add_option("--split", fit.split, "Split size M (default ceil(N/2))");
  f->add_option("--alphabet", fit.alphabet, "Alphabet sizes (default: column maxima)")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  f->add_option("--seed", fit.seed, "Seed for random initializations")->capture_default_str();
  fit.iters.add(f);
  f->add_option("--out", fit.out, "Model output path (default stdout)");
  f->add_option("--report", fit.report, "Iteration trace CSV");
  f->add_flag("--record-time", fit.record_time, "Write wall times into the trace");

  EvalArgs ev;
  CLI::App* e = app.add_subcommand("eval", "Score a model against a truth model and/or samples");
  add_config(e);
  e->add_option("--model", ev.model, "Estimated model");
  e->add_option("--truth", ev.truth, "Ground-truth model (for mse and mre)");
  e->add_option("--input", ev.input, "Sample CSV (for log-likelihood)");
  e->add_option("--out", ev.out, "Metrics CSV (default stdout)");

  PredictArgs pr;
  CLI::App* p = app.add_subcommand("predict", "Predict one column from the others");
  add_config(p);
  p->add_option("--model", pr.model, "Model file");
  p->add_option("--input", pr.input, "Sample CSV");
  p->add_option("--target", pr.target, "Target column name or 1-based index");
  p->add_option("--mode", pr.mode, "map or mmse")->capture_default_str();
  p->add_option("--out", pr.out, "Predictions CSV (default stdout)");

  BenchArgs bench;
  CLI::App* b = app.add_subcommand("benchmark", "Run a seeded grid of synthetic trials");
  add_config(b);
  b->add_option("--vars", bench.cfg.num_vars, "Number of variables N")->capture_default_str();
  b->add_option("--rank", bench.cfg.rank, "Latent rank F")->capture_default_str();
  b->add_option("--alphabet", bench.cfg.alphabet, "Alphabet size I")->capture_default_str();
  b->add_option("--obs-prob", bench.cfg.obs_prob, "Probability a cell is observed")
      ->capture_default_str();
  b->add_option("--eps", bench.cfg.eps, "Plant eps-separable rows");
  b->add_option("--split", bench.cfg.split, "Split size M")->capture_default_str();
  b->add_option("--samples", bench.cfg.sample_sizes, "Sample sizes, comma separated")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  b->add_option("--method,--methods", bench.methods, "Comma-separated methods")
      ->capture_default_str();
  b->add_option("--trials", bench.cfg.trials, "Trials per sample size")->capture_default_str();
  b->add_option("--seed", bench.cfg.seed, "Base seed")->capture_default_str();
  b->add_option("--threads", bench.cfg.threads, "Worker threads (0 = one per processor)")
      ->capture_default_str();
  bench.iters.add(b);
  b->add_option("--out", bench.out, "Results CSV (default stdout)");
  b->add_flag("--record-time", bench.record_time, "Write wall times instead of 0");

  try {
    const std::vector<std::string> expanded = expand_config(args);
    app.parse(std::vector<std::string>(expanded.rbegin(), expanded.rend()));
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitConfig;
  }

  try {
    if (s->parsed()) {
      cmd_synth(synth, err);
    } else if (f->parsed()) {
      return cmd_fit(fit, out, err);
    } else if (e->parsed()) {
      cmd_eval(ev, out);
    } else if (p->parsed()) {
      cmd_predict(pr, out);
    } else if (b->parsed()) {
      cmd_benchmark(bench, out);
    }
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const DataError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  } catch (const NumericalError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace pmfrec
