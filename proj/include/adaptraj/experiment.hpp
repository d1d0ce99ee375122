// Multi-source generalization experiments on synthetic domains: method
// comparison on a held-out domain, the source-count sweep, and report
// emission.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "adaptraj/inference.hpp"
#include "adaptraj/synthetic.hpp"
#include "adaptraj/training.hpp"

namespace adaptraj {

struct ExperimentCell {
  Method method = Method::kVanilla;
  std::uint64_t seed = 0;
  int n_sources = 0;
  EvalResult target;
  double best_val_ade = 0.0;
  int best_epoch = -1;
};

struct MethodSummary {
  Method method = Method::kVanilla;
  int n_sources = 0;
  std::vector<double> ade;  // one entry per seed, in seed order
  std::vector<double> fde;
  double ade_mean = 0, ade_std = 0, fde_mean = 0, fde_std = 0;
};

struct ExperimentReport {
  std::string kind;  // "generalization" or "source_sweep"
  std::string target;
  int k_samples = 1;
  std::vector<std::string> sources;
  std::vector<ExperimentCell> cells;
  std::vector<MethodSummary> summaries;

  const MethodSummary& summary(Method m, int n_sources) const {
    for (const auto& s : summaries) {
      if (s.method == m && s.n_sources == n_sources) return s;
    }
    throw std::out_of_range("no summary for " + method_label(m) + " with " + std::to_string(n_sources) + " sources");
  }
};

struct ExperimentOptions {
  HyperParams hp;                      // seed and n_domains are overwritten per cell
  int k_samples = 1;
  std::ostream* progress = nullptr;    // one line per finished cell
  std::filesystem::path log_dir;       // per-cell training logs when non-empty
};

using CellKey = std::tuple<Method, std::uint64_t, int>;
using CellCache = std::map<CellKey, ExperimentCell>;

namespace detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

inline std::string cell_tag(Method m, std::uint64_t seed, int n_sources) {
  std::string label = method_label(m);
  std::replace(label.begin(), label.end(), '/', '_');
  return label + "_seed" + std::to_string(seed) + "_n" + std::to_string(n_sources);
}

inline std::vector<DomainCorpus> generate_all(const std::vector<DomainProfile>& profiles, std::uint64_t seed) {
  std::vector<DomainCorpus> out;
  out.reserve(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    out.push_back(generate_synthetic_domain(profiles[i], seed * 1000 + i));
  }
  return out;
}

inline std::vector<std::size_t> source_indices(std::size_t n_domains, std::size_t target) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n_domains; ++i) {
    if (i != target) idx.push_back(i);
  }
  return idx;
}

inline ExperimentCell run_cell(const std::vector<DomainCorpus>& corpora, const std::vector<std::size_t>& sources,
                               std::size_t target, Method method, std::uint64_t seed, const ExperimentOptions& opt) {
  std::vector<const DomainCorpus*> src;
  for (std::size_t i : sources) src.push_back(&corpora[i]);
  HyperParams hp = opt.hp;
  hp.seed = seed;
  std::ofstream log_file;
  TrainOptions topt;
  if (!opt.log_dir.empty()) {
    std::filesystem::create_directories(opt.log_dir);
    const auto path = opt.log_dir / (cell_tag(method, seed, static_cast<int>(sources.size())) + ".jsonl");
    log_file.open(path, std::ios::binary | std::ios::trunc);
    if (!log_file) throw DataError("cannot write training log " + path.string());
    topt.log = &log_file;
  }
  auto trained = run_training<float>(src, hp, method, topt);
  ExperimentCell cell;
  cell.method = method;
  cell.seed = seed;
  cell.n_sources = static_cast<int>(sources.size());
  cell.target = evaluate(*trained.model, corpora[target].test(), opt.k_samples, seed);
  cell.best_val_ade = trained.best_val_ade;
  cell.best_epoch = trained.best_epoch;
  if (opt.progress != nullptr) {
    *opt.progress << std::fixed << std::setprecision(4) << method_label(method) << " seed=" << seed
                  << " sources=" << cell.n_sources << " target_ade=" << cell.target.ade
                  << " target_fde=" << cell.target.fde << " best_epoch=" << cell.best_epoch << '\n'
                  << std::defaultfloat;
  }
  return cell;
}

inline void summarize(ExperimentReport& report) {
  std::vector<std::pair<Method, int>> order;
  for (const auto& c : report.cells) {
    const auto key = std::make_pair(c.method, c.n_sources);
    if (std::find(order.begin(), order.end(), key) == order.end()) order.push_back(key);
  }
  for (const auto& [m, n] : order) {
    MethodSummary s;
    s.method = m;
    s.n_sources = n;
    for (const auto& c : report.cells) {
      if (c.method == m && c.n_sources == n) {
        s.ade.push_back(c.target.ade);
        s.fde.push_back(c.target.fde);
      }
    }
    mean_std(s.ade, s.ade_mean, s.ade_std);
    mean_std(s.fde, s.fde_mean, s.fde_std);
    report.summaries.push_back(std::move(s));
  }
}

inline void check_profiles(const std::vector<DomainProfile>& profiles, std::size_t target, std::size_t min_domains) {
  if (profiles.size() < min_domains) {
    throw ConfigError("experiment needs at least " + std::to_string(min_domains) + " domain profiles");
  }
  if (target >= profiles.size()) throw ConfigError("target index out of range");
}

}  // namespace detail

/// Trains every method on all non-target domains and evaluates on the
/// target's test split, once per seed. Scenes for seed s are regenerated from
/// s, so seeds vary both data and initialization.
inline ExperimentReport run_generalization_experiment(const std::vector<DomainProfile>& profiles,
                                                      std::size_t target_index, const std::vector<Method>& methods,
                                                      const std::vector<std::uint64_t>& seeds,
                                                      const ExperimentOptions& opt, CellCache* cache = nullptr) {
  detail::check_profiles(profiles, target_index, 2);
  if (methods.empty() || seeds.empty()) throw ConfigError("experiment needs at least one method and one seed");
  ExperimentReport report;
  report.kind = "generalization";
  report.target = profiles[target_index].name;
  report.k_samples = opt.k_samples;
  const auto sources = detail::source_indices(profiles.size(), target_index);
  for (std::size_t i : sources) report.sources.push_back(profiles[i].name);
  for (std::uint64_t seed : seeds) {
    const auto corpora = detail::generate_all(profiles, seed);
    for (Method m : methods) {
      const CellKey key{m, seed, static_cast<int>(sources.size())};
      if (cache != nullptr && cache->contains(key)) {
        report.cells.push_back(cache->at(key));
        continue;
      }
      auto cell = detail::run_cell(corpora, sources, target_index, m, seed, opt);
      if (cache != nullptr) cache->emplace(key, cell);
      report.cells.push_back(std::move(cell));
    }
  }
  detail::summarize(report);
  return report;
}

/// For n = 1..max_sources trains vanilla and adaptraj on the first n
/// non-target domains and evaluates on the target.
inline ExperimentReport run_source_count_sweep(const std::vector<DomainProfile>& profiles, std::size_t target_index,
                                               int max_sources, const std::vector<std::uint64_t>& seeds,
                                               const ExperimentOptions& opt, CellCache* cache = nullptr) {
  detail::check_profiles(profiles, target_index, 4);
  const auto all_sources = detail::source_indices(profiles.size(), target_index);
  if (max_sources < 1 || static_cast<std::size_t>(max_sources) > all_sources.size()) {
    throw ConfigError("max_sources must lie in [1, " + std::to_string(all_sources.size()) + "]");
  }
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  ExperimentReport report;
  report.kind = "source_sweep";
  report.target = profiles[target_index].name;
  report.k_samples = opt.k_samples;
  for (int n = 0; n < max_sources; ++n) report.sources.push_back(profiles[all_sources[static_cast<std::size_t>(n)]].name);
  for (std::uint64_t seed : seeds) {
    const auto corpora = detail::generate_all(profiles, seed);
    for (int n = 1; n <= max_sources; ++n) {
      const std::vector<std::size_t> sources(all_sources.begin(), all_sources.begin() + n);
      for (Method m : {Method::kVanilla, Method::kAdapTraj}) {
        const CellKey key{m, seed, n};
        if (cache != nullptr && cache->contains(key)) {
          report.cells.push_back(cache->at(key));
          continue;
        }
        auto cell = detail::run_cell(corpora, sources, target_index, m, seed, opt);
        if (cache != nullptr) cache->emplace(key, cell);
        report.cells.push_back(std::move(cell));
      }
    }
  }
  detail::summarize(report);
  return report;
}

/// Table with one row per (method, source count): mean±std ADE and FDE in
/// meters, followed by the per-seed ADE values.
inline std::string format_report_table(const ExperimentReport& r) {
  std::ostringstream os;
  os << r.kind << " target=" << r.target << " sources=";
  for (std::size_t i = 0; i < r.sources.size(); ++i) os << (i ? "," : "") << r.sources[i];
  os << " K=" << r.k_samples << '\n';
  os << std::left << std::setw(16) << "method" << std::right << std::setw(8) << "sources" << std::setw(20)
     << "ADE mean/std" << std::setw(20) << "FDE mean/std" << "   per-seed ADE\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& s : r.summaries) {
    std::ostringstream ade, fde;
    ade << std::fixed << std::setprecision(4) << s.ade_mean << '/' << s.ade_std;
    fde << std::fixed << std::setprecision(4) << s.fde_mean << '/' << s.fde_std;
    os << std::left << std::setw(16) << method_label(s.method) << std::right << std::setw(8) << s.n_sources
       << std::setw(20) << ade.str() << std::setw(20) << fde.str() << "   ";
    for (std::size_t i = 0; i < s.ade.size(); ++i) os << (i ? " " : "") << s.ade[i];
    os << '\n';
  }
  return os.str();
}

/// Newline-delimited records: one per cell, then one per summary row.
inline void write_report_jsonl(const ExperimentReport& r, std::ostream& os) {
  for (const auto& c : r.cells) {
    os << json{{"record", "cell"},          {"experiment", r.kind},
               {"target", r.target},        {"method", method_label(c.method)},
               {"seed", c.seed},            {"n_sources", c.n_sources},
               {"k", r.k_samples},          {"n_scenes", c.target.n_scenes},
               {"ade", c.target.ade},       {"fde", c.target.fde},
               {"best_val_ade", c.best_val_ade}, {"best_epoch", c.best_epoch}}
              .dump()
       << '\n';
  }
  for (const auto& s : r.summaries) {
    os << json{{"record", "summary"},   {"experiment", r.kind},  {"target", r.target},
               {"method", method_label(s.method)}, {"n_sources", s.n_sources},
               {"ade_mean", s.ade_mean}, {"ade_std", s.ade_std}, {"fde_mean", s.fde_mean},
               {"fde_std", s.fde_std},   {"ade", s.ade},         {"fde", s.fde}}
              .dump()
       << '\n';
  }
}

struct GateResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// adaptraj beats vanilla on mean target ADE and strictly in at least
/// two thirds of the seeds (rounded up, ≥ 2 of 3).
inline GateResult gate_generalization(const ExperimentReport& r, int n_sources) {
  const auto& a = r.summary(Method::kAdapTraj, n_sources);
  const auto& v = r.summary(Method::kVanilla, n_sources);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < a.ade.size(); ++i) wins += a.ade[i] < v.ade[i] ? 1 : 0;
  const std::size_t needed = (2 * a.ade.size() + 2) / 3;
  GateResult g;
  g.name = "adaptraj beats vanilla on the held-out domain";
  g.passed = a.ade_mean < v.ade_mean && wins >= needed;
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << "adaptraj " << a.ade_mean << " vs vanilla " << v.ade_mean << ", wins "
     << wins << "/" << a.ade.size();
  g.detail = os.str();
  return g;
}

/// Full model mean ADE no worse than each ablation, up to one standard
/// deviation of the full model's per-seed ADE.
inline GateResult gate_ablation(const ExperimentReport& r, int n_sources) {
  const auto& a = r.summary(Method::kAdapTraj, n_sources);
  GateResult g;
  g.name = "full adaptraj no worse than either ablation";
  g.passed = true;
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << "adaptraj " << a.ade_mean << "±" << a.ade_std;
  for (Method m : {Method::kWithoutSpecific, Method::kWithoutInvariant}) {
    const auto& b = r.summary(m, n_sources);
    const bool ok = a.ade_mean <= b.ade_mean + a.ade_std;
    g.passed = g.passed && ok;
    os << ", " << method_label(m) << " " << b.ade_mean << (ok ? "" : " (worse)");
  }
  g.detail = os.str();
  return g;
}

/// adaptraj mean target ADE with max sources no worse than with one.
inline GateResult gate_source_trend(const ExperimentReport& r) {
  int max_n = 1;
  for (const auto& s : r.summaries) max_n = std::max(max_n, s.n_sources);
  const auto& one = r.summary(Method::kAdapTraj, 1);
  const auto& many = r.summary(Method::kAdapTraj, max_n);
  GateResult g;
  g.name = "adaptraj improves with more sources";
  g.passed = many.ade_mean <= one.ade_mean;
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << "n=1 " << one.ade_mean << ", n=" << max_n << " " << many.ade_mean;
  const auto& v1 = r.summary(Method::kVanilla, 1);
  const auto& vn = r.summary(Method::kVanilla, max_n);
  os << "; vanilla n=1 " << v1.ade_mean << ", n=" << max_n << " " << vn.ade_mean << " (reported only)";
  g.detail = os.str();
  return g;
}

}  // namespace adaptraj
