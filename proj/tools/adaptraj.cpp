// Command-line front end: data generation and ingestion, statistics,
// training, evaluation, and the generalization experiments.
#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "adaptraj/experiment.hpp"
#include "adaptraj/ingest.hpp"

namespace fs = std::filesystem;
using namespace adaptraj;

namespace {

HyperParams load_config(const std::string& path) {
  if (path.empty()) return HyperParams{};
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  try {
    auto hp = json::parse(is).get<HyperParams>();
    hp.validate();
    return hp;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

int report_gates(const std::vector<GateResult>& gates, bool gate) {
  bool ok = true;
  for (const auto& g : gates) {
    std::cout << (g.passed ? "PASS " : "FAIL ") << g.name << ": " << g.detail << '\n';
    ok = ok && g.passed;
  }
  return (gate && !ok) ? 3 : 0;
}

void emit_report(const ExperimentReport& r, const std::string& out_dir, const std::string& stem) {
  const std::string table = format_report_table(r);
  std::cout << table;
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / (stem + ".txt"), table);
  std::ostringstream jl;
  write_report_jsonl(r, jl);
  write_text(fs::path(out_dir) / (stem + ".jsonl"), jl.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source domain-generalizing trajectory prediction"};
  app.require_subcommand(1);

  // generate
  std::string profile_path, gen_out;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("generate", "Simulate synthetic domain corpora from profiles");
  gen->add_option("--profile", profile_path, "Profile JSON (one profile, a list, or {\"domains\": [...]})")->required();
  gen->add_option("--seed", gen_seed, "Base seed; profile i uses seed*1000+i")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();

  // stats
  std::vector<std::string> stats_in;
  auto* stats = app.add_subcommand("stats", "Print per-domain motion statistics");
  stats->add_option("--in", stats_in, "Corpus directory (repeatable)")->required();

  // ingest
  std::string raw_path, units_text, ingest_out;
  int ingest_domain = 0;
  auto* ingest = app.add_subcommand("ingest", "Resample raw tracks into a corpus");
  ingest->add_option("--raw", raw_path, "Raw 't agent x y' track file")->required();
  ingest->add_option("--units", units_text, "m or px:<meters per pixel>")->required();
  ingest->add_option("--out", ingest_out, "Output directory")->required();
  ingest->add_option("--domain-id", ingest_domain, "Domain id written into each scene");

  // train
  std::string train_sources, train_config, train_out, train_method = "adaptraj";
  std::uint64_t train_seed = 0;
  bool train_seed_set = false;
  auto* train = app.add_subcommand("train", "Train on source corpora");
  train->add_option("--sources", train_sources, "Comma-separated corpus directories")->required();
  train->add_option("--config", train_config, "HyperParams JSON");
  train->add_option("--out", train_out, "Checkpoint directory")->required();
  train->add_option("--method", train_method, "vanilla, adaptraj, w/o-specific or w/o-invariant");
  auto* seed_opt = train->add_option("--seed", train_seed, "Overrides the config seed");

  // eval
  std::string eval_ckpt, eval_target, eval_split = "test", eval_report;
  int eval_k = 1;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a target corpus");
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--target", eval_target, "Target corpus directory")->required();
  eval->add_option("--k", eval_k, "Samples per scene (best-of-K)")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "Noise seed for K > 1");
  eval->add_option("--split", eval_split, "test or all")->check(CLI::IsMember({"test", "all"}));
  eval->add_option("--report", eval_report, "Append the JSONL record to this file");

  // experiment
  std::string exp_profiles, exp_methods = "vanilla,adaptraj,w/o-specific,w/o-invariant", exp_seeds = "1,2,3",
                            exp_config, exp_out;
  std::size_t exp_target = 0;
  int exp_k = 1;
  bool exp_gate = false;
  auto* exp = app.add_subcommand("experiment", "Held-out-domain comparison of methods");
  exp->add_option("--profiles", exp_profiles, "Profiles JSON")->required();
  exp->add_option("--target-index", exp_target, "Index of the held-out profile")->required();
  exp->add_option("--methods", exp_methods, "Comma-separated method labels");
  exp->add_option("--seeds", exp_seeds, "Comma-separated seeds");
  exp->add_option("--config", exp_config, "HyperParams JSON");
  exp->add_option("--k", exp_k, "Samples per scene")->check(CLI::PositiveNumber);
  exp->add_option("--out", exp_out, "Directory for reports and training logs");
  exp->add_flag("--gate", exp_gate, "Exit nonzero when an acceptance check fails");

  // sweep
  std::string sweep_profiles, sweep_seeds = "1,2,3", sweep_config, sweep_out;
  std::size_t sweep_target = 0;
  int sweep_max = 3, sweep_k = 1;
  bool sweep_gate = false;
  auto* sweep = app.add_subcommand("sweep", "Target error versus number of source domains");
  sweep->add_option("--profiles", sweep_profiles, "Profiles JSON")->required();
  sweep->add_option("--target-index", sweep_target, "Index of the held-out profile")->required();
  sweep->add_option("--max-sources", sweep_max, "Largest source count")->required();
  sweep->add_option("--seeds", sweep_seeds, "Comma-separated seeds");
  sweep->add_option("--config", sweep_config, "HyperParams JSON");
  sweep->add_option("--k", sweep_k, "Samples per scene")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_out, "Directory for reports and training logs");
  sweep->add_flag("--gate", sweep_gate, "Exit nonzero when an acceptance check fails");

  CLI11_PARSE(app, argc, argv);
  train_seed_set = seed_opt->count() > 0;

  auto parse_seeds = [](const std::string& text) {
    std::vector<std::uint64_t> out;
    for (const auto& s : split_list(text)) out.push_back(std::stoull(s));
    if (out.empty()) throw ConfigError("no seeds given");
    return out;
  };

  try {
    if (*gen) {
      const auto profiles = read_profiles(profile_path);
      for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto corpus = generate_synthetic_domain(profiles[i], gen_seed * 1000 + i);
        const fs::path dir = profiles.size() == 1 ? fs::path(gen_out) : fs::path(gen_out) / profiles[i].name;
        write_corpus(corpus, dir);
        std::cout << "wrote " << corpus.scenes.size() << " scenes to " << dir.string() << '\n';
      }
    } else if (*stats) {
      std::vector<std::pair<std::string, DomainStats>> rows;
      for (const auto& dir : stats_in) {
        rows.emplace_back(fs::path(dir).filename().string(), compute_domain_statistics(read_corpus(dir)));
      }
      std::cout << format_stats_table(rows);
    } else if (*ingest) {
      std::ifstream is(raw_path);
      if (!is) throw DataError("cannot read " + raw_path);
      const auto result = resample_and_normalize(read_raw_tracks(is), parse_units(units_text), ingest_domain);
      DomainCorpus corpus;
      corpus.domain_id = ingest_domain;
      corpus.scenes = result.scenes;
      if (corpus.scenes.size() >= 5) chronological_split(corpus);
      if (!corpus.scenes.empty()) corpus.stats = compute_domain_statistics(corpus.scenes);
      write_corpus(corpus, ingest_out);
      std::cout << "wrote " << corpus.scenes.size() << " scenes (" << result.skipped_tracks
                << " tracks too short) to " << ingest_out << '\n';
    } else if (*train) {
      HyperParams hp = load_config(train_config);
      if (train_seed_set) hp.seed = train_seed;
      std::vector<DomainCorpus> corpora;
      for (const auto& dir : split_list(train_sources)) corpora.push_back(read_corpus(dir));
      std::vector<const DomainCorpus*> sources;
      for (const auto& c : corpora) sources.push_back(&c);
      fs::create_directories(train_out);
      std::ofstream log(fs::path(train_out) / "train_log.jsonl", std::ios::binary | std::ios::trunc);
      if (!log) throw DataError("cannot write training log in " + train_out);
      auto result = run_training<float>(sources, hp, parse_method(train_method), TrainOptions{&log});
      result.model->save(fs::path(train_out) / "model.ckpt");
      std::cout << "best epoch " << result.best_epoch << ", source val ADE " << result.best_val_ade << '\n';
    } else if (*eval) {
      const auto model = AdapTrajModel<float>::load(eval_ckpt);
      const auto corpus = read_corpus(eval_target);
      std::vector<const TrajectoryScene*> scenes;
      if (eval_split == "test" && corpus.is_split()) {
        scenes = corpus.test();
      } else {
        for (const auto& s : corpus.scenes) scenes.push_back(&s);
      }
      const auto r = evaluate(*model, scenes, eval_k, eval_seed);
      std::cout << std::left << std::setw(16) << "method" << std::setw(10) << "scenes" << std::setw(6) << "K"
                << std::setw(10) << "ADE" << "FDE\n"
                << std::setw(16) << method_label(model->method()) << std::setw(10) << r.n_scenes << std::setw(6)
                << eval_k << std::fixed << std::setprecision(4) << std::setw(10) << r.ade << r.fde << '\n';
      const json rec{{"method", method_label(model->method())},
                     {"target", fs::path(eval_target).filename().string()},
                     {"domain_id", corpus.domain_id},
                     {"split", eval_split},
                     {"n_scenes", r.n_scenes},
                     {"k", eval_k},
                     {"seed", eval_seed},
                     {"ade", r.ade},
                     {"fde", r.fde}};
      std::cout << rec.dump() << '\n';
      if (!eval_report.empty()) {
        std::ofstream os(eval_report, std::ios::binary | std::ios::app);
        if (!os) throw DataError("cannot write " + eval_report);
        os << rec.dump() << '\n';
      }
    } else if (*exp) {
      ExperimentOptions opt;
      opt.hp = load_config(exp_config);
      opt.k_samples = exp_k;
      opt.progress = &std::cerr;
      if (!exp_out.empty()) opt.log_dir = fs::path(exp_out) / "logs";
      std::vector<Method> methods;
      for (const auto& m : split_list(exp_methods)) methods.push_back(parse_method(m));
      const auto profiles = read_profiles(exp_profiles);
      const auto report = run_generalization_experiment(profiles, exp_target, methods, parse_seeds(exp_seeds), opt);
      emit_report(report, exp_out, "experiment");
      const int n = static_cast<int>(report.sources.size());
      auto has = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
      std::vector<GateResult> gates;
      if (has(Method::kAdapTraj) && has(Method::kVanilla)) gates.push_back(gate_generalization(report, n));
      if (has(Method::kAdapTraj) && has(Method::kWithoutSpecific) && has(Method::kWithoutInvariant)) {
        gates.push_back(gate_ablation(report, n));
      }
      return report_gates(gates, exp_gate);
    } else if (*sweep) {
      ExperimentOptions opt;
      opt.hp = load_config(sweep_config);
      opt.k_samples = sweep_k;
      opt.progress = &std::cerr;
      if (!sweep_out.empty()) opt.log_dir = fs::path(sweep_out) / "logs";
      const auto report =
          run_source_count_sweep(read_profiles(sweep_profiles), sweep_target, sweep_max, parse_seeds(sweep_seeds), opt);
      emit_report(report, sweep_out, "sweep");
      return report_gates({gate_source_trend(report)}, sweep_gate);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
