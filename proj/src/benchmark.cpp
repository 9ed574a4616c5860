#include "pmfrec/benchmark.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

#include "pmfrec/evaluation.hpp"
#include "pmfrec/inference.hpp"
#include "pmfrec/io.hpp"
#include "pmfrec/rng.hpp"
#include "pmfrec/synth.hpp"

namespace pmfrec {

void BenchmarkConfig::validate() const {
  if (trials < 1) throw ConfigError("trials must be positive");
  if (sample_sizes.empty()) throw ConfigError("no sample sizes given");
  for (Index s : sample_sizes) {
    if (s < 1) throw ConfigError("sample sizes must be positive");
  }
  if (methods.empty()) throw ConfigError("no methods given");
  SynthConfig synth;
  synth.num_vars = num_vars;
  synth.rank = rank;
  synth.alphabet_sizes = {alphabet};
  synth.obs_prob = obs_prob;
  synth.eps = eps;
  synth.split = split;
  synth.validate();
  opt.validate();
  em.validate();
}

namespace {

std::vector<BenchmarkRow> run_cell(const BenchmarkConfig& cfg, int trial, Index samples) {
  const auto t = static_cast<std::uint64_t>(trial);
  SynthConfig synth;
  synth.num_vars = cfg.num_vars;
  synth.rank = cfg.rank;
  synth.alphabet_sizes = {cfg.alphabet};
  synth.obs_prob = cfg.obs_prob;
  synth.eps = cfg.eps;
  synth.split = cfg.split;
  synth.seed = derive_seed(cfg.seed, t);
  FactorModeld truth = gen_model(synth);
  if (cfg.eps) truth = plant_separability(truth, cfg.split, *cfg.eps, synth.seed).model;

  const auto s_key = static_cast<std::uint64_t>(samples);
  const SampleTable data = sample_data(truth, samples, cfg.obs_prob, derive_seed(cfg.seed, t, s_key));
  const PairwiseSetd pairs = estimate_pairwise(data);
  const bool joint_fits = joint_cell_count(truth.alphabet_sizes()) <= static_cast<double>(cfg.cell_budget);

  MethodSettings settings;
  settings.rank = cfg.rank;
  settings.split = cfg.split;
  settings.opt = cfg.opt;
  settings.em = cfg.em;
  settings.seed = derive_seed(cfg.seed ^ 0x72616e64ULL, t, s_key);

  std::optional<SpaResult<double>> spa;
  double spa_seconds = 0;
  std::string spa_failure;
  std::vector<BenchmarkRow> rows;
  for (Method m : cfg.methods) {
    BenchmarkRow row;
    row.method = m;
    row.num_vars = cfg.num_vars;
    row.rank = cfg.rank;
    row.alphabet = cfg.alphabet;
    row.obs_prob = cfg.obs_prob;
    row.eps = cfg.eps;
    row.samples = samples;
    row.trial = trial;
    const bool uses_spa = m == Method::kSpa || m == Method::kSpaEm || m == Method::kSpaOpt;
    try {
      if (uses_spa && !spa) {
        if (!spa_failure.empty()) throw NumericalError(spa_failure);
        Stopwatch sw;
        try {
          spa = fit_cnmf_spa(pairs, cfg.rank, cfg.split);
        } catch (const NumericalError& e) {
          spa_failure = e.what();
          throw;
        }
        spa_seconds = sw.seconds();
      }
      Stopwatch sw;
      MethodOutcome outcome = run_method(m, pairs, &data, settings, spa);
      row.seconds = sw.seconds() + (uses_spa ? spa_seconds : 0.0);
      if (!outcome.report.failure.empty()) row.failure = outcome.report.failure;
      row.mse = mse(truth, outcome.model);
      if (joint_fits) row.mre = mre(truth, outcome.model, cfg.cell_budget);
    } catch (const NumericalError& e) {
      row.failure = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  struct Job {
    int trial;
    std::size_t size_index;
  };
  std::vector<Job> jobs;
  for (std::size_t si = 0; si < cfg.sample_sizes.size(); ++si) {
    for (int trial = 0; trial < cfg.trials; ++trial) jobs.push_back({trial, si});
  }
  std::vector<std::vector<BenchmarkRow>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        results[j] = run_cell(cfg, jobs[j].trial, cfg.sample_sizes[jobs[j].size_index]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<BenchmarkRow> rows;
  for (auto& r : results) {
    for (auto& row : r) rows.push_back(std::move(row));
  }
  return rows;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows,
                         bool record_time) {
  char buf[64];
  out << "method,N,F,I,p,eps,S,trial,mse,mre,seconds\n";
  for (const auto& r : rows) {
    out << method_name(r.method) << ',' << r.num_vars << ',' << r.rank << ',' << r.alphabet << ',';
    std::snprintf(buf, sizeof buf, "%g", r.obs_prob);
    out << buf << ',';
    if (r.eps) {
      std::snprintf(buf, sizeof buf, "%g", *r.eps);
      out << buf;
    }
    out << ',' << r.samples << ',' << r.trial << ',';
    if (r.mse) out << format_double(*r.mse);
    out << ',';
    if (r.mre) out << format_double(*r.mre);
    out << ',';
    if (record_time) {
      std::snprintf(buf, sizeof buf, "%.6f", r.seconds);
      out << buf;
    } else {
      out << 0;
    }
    out << '\n';
  }
}

}  // namespace pmfrec
