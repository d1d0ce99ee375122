// Per-domain scene collections: chronological 6:2:2 splitting, Table-style
// motion statistics, and the on-disk corpus directory layout.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "adaptraj/types.hpp"

namespace adaptraj {

struct DomainStats {
  std::size_t n_sequences = 0;
  double num_mean = 0, num_std = 0;
  double vx_mean = 0, vx_std = 0, vy_mean = 0, vy_std = 0;
  double ax_mean = 0, ax_std = 0, ay_mean = 0, ay_std = 0;
};

inline void to_json(json& j, const DomainStats& s) {
  j = json{{"n_sequences", s.n_sequences}, {"num_mean", s.num_mean}, {"num_std", s.num_std},
           {"vx_mean", s.vx_mean},         {"vx_std", s.vx_std},     {"vy_mean", s.vy_mean},
           {"vy_std", s.vy_std},           {"ax_mean", s.ax_mean},   {"ax_std", s.ax_std},
           {"ay_mean", s.ay_mean},         {"ay_std", s.ay_std}};
}

inline void from_json(const json& j, DomainStats& s) {
  j.at("n_sequences").get_to(s.n_sequences);
  j.at("num_mean").get_to(s.num_mean);
  j.at("num_std").get_to(s.num_std);
  j.at("vx_mean").get_to(s.vx_mean);
  j.at("vx_std").get_to(s.vx_std);
  j.at("vy_mean").get_to(s.vy_mean);
  j.at("vy_std").get_to(s.vy_std);
  j.at("ax_mean").get_to(s.ax_mean);
  j.at("ax_std").get_to(s.ax_std);
  j.at("ay_mean").get_to(s.ay_mean);
  j.at("ay_std").get_to(s.ay_std);
}

/// Scenes of one domain. After chronological_split() the scenes are in time
/// order and the splits are the contiguous ranges [0, n_train),
/// [n_train, n_train + n_val), and the remainder.
struct DomainCorpus {
  DomainId domain_id = 0;
  std::vector<TrajectoryScene> scenes;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  DomainStats stats;

  bool is_split() const { return n_train + n_val + n_test == scenes.size() && !scenes.empty(); }

  std::vector<const TrajectoryScene*> train() const { return range(0, n_train); }
  std::vector<const TrajectoryScene*> val() const { return range(n_train, n_val); }
  std::vector<const TrajectoryScene*> test() const { return range(n_train + n_val, n_test); }

 private:
  std::vector<const TrajectoryScene*> range(std::size_t begin, std::size_t count) const {
    std::vector<const TrajectoryScene*> out;
    out.reserve(count);
    for (std::size_t i = begin; i < begin + count && i < scenes.size(); ++i) out.push_back(&scenes[i]);
    return out;
  }
};

namespace detail {

/// Running mean and population variance (Welford).
struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  double stddev() const { return n == 0 ? 0.0 : std::sqrt(std::max(0.0, m2 / static_cast<double>(n))); }
};

struct MotionMoments {
  Moments vx, vy, ax, ay;

  // Consumes one track where valid[t] marks usable frames.
  void add_track(const std::vector<Location>& pts, const std::vector<bool>& valid) {
    bool have_prev_v = false;
    double pvx = 0, pvy = 0;
    for (std::size_t t = 1; t < pts.size(); ++t) {
      if (!(valid[t] && valid[t - 1])) {
        have_prev_v = false;
        continue;
      }
      const double vx = (pts[t].x - pts[t - 1].x) / kFrameDt;
      const double vy = (pts[t].y - pts[t - 1].y) / kFrameDt;
      this->vx.add(std::abs(vx));
      this->vy.add(std::abs(vy));
      if (have_prev_v) {
        ax.add(std::abs(vx - pvx) / kFrameDt);
        ay.add(std::abs(vy - pvy) / kFrameDt);
      }
      pvx = vx;
      pvy = vy;
      have_prev_v = true;
    }
  }
};

}  // namespace detail

/// Crowd density, per-axis speed magnitude, and per-axis acceleration
/// magnitude over every scene. Speeds are |Δposition| / 0.4 s per
/// consecutive valid frame pair; accelerations |Δvelocity| / 0.4 s.
inline DomainStats compute_domain_statistics(const std::vector<TrajectoryScene>& scenes) {
  if (scenes.empty()) throw DataError("compute_domain_statistics: empty corpus");
  detail::Moments num;
  detail::MotionMoments motion;
  for (const auto& s : scenes) {
    num.add(static_cast<double>(1 + s.neighbors.size()));
    std::vector<Location> focal = s.focal_observed;
    focal.insert(focal.end(), s.focal_future.begin(), s.focal_future.end());
    motion.add_track(focal, std::vector<bool>(focal.size(), true));
    for (const auto& nb : s.neighbors) motion.add_track(nb.pts, nb.valid);
  }
  DomainStats out;
  out.n_sequences = scenes.size();
  out.num_mean = num.mean;
  out.num_std = num.stddev();
  out.vx_mean = motion.vx.mean;
  out.vx_std = motion.vx.stddev();
  out.vy_mean = motion.vy.mean;
  out.vy_std = motion.vy.stddev();
  out.ax_mean = motion.ax.mean;
  out.ax_std = motion.ax.stddev();
  out.ay_mean = motion.ay.mean;
  out.ay_std = motion.ay.stddev();
  return out;
}

inline DomainStats compute_domain_statistics(const DomainCorpus& corpus) {
  return compute_domain_statistics(corpus.scenes);
}

/// Stable-sorts scenes by timestamp_origin and assigns a contiguous 6:2:2
/// partition: val and test get floor(n/5) scenes each, train the rest.
inline void chronological_split(DomainCorpus& corpus) {
  const std::size_t n = corpus.scenes.size();
  if (n < 5) {
    throw DataError("chronological_split: need at least 5 scenes, got " + std::to_string(n));
  }
  std::stable_sort(corpus.scenes.begin(), corpus.scenes.end(),
                   [](const TrajectoryScene& a, const TrajectoryScene& b) {
                     return a.timestamp_origin < b.timestamp_origin;
                   });
  corpus.n_val = n / 5;
  corpus.n_test = n / 5;
  corpus.n_train = n - corpus.n_val - corpus.n_test;
}

/// Renders statistics as a per-domain dataset table.
inline std::string format_stats_table(const std::vector<std::pair<std::string, DomainStats>>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "domain" << std::right << std::setw(10) << "sequences"
     << std::setw(16) << "num avg/std" << std::setw(16) << "v(x) avg/std" << std::setw(16)
     << "v(y) avg/std" << std::setw(16) << "a(x) avg/std" << std::setw(16) << "a(y) avg/std"
     << '\n';
  auto pair = [](double m, double s) {
    std::ostringstream p;
    p << std::fixed << std::setprecision(3) << m << "/" << s;
    return p.str();
  };
  for (const auto& [name, s] : rows) {
    os << std::left << std::setw(16) << name << std::right << std::setw(10) << s.n_sequences
       << std::setw(16) << pair(s.num_mean, s.num_std) << std::setw(16) << pair(s.vx_mean, s.vx_std)
       << std::setw(16) << pair(s.vy_mean, s.vy_std) << std::setw(16) << pair(s.ax_mean, s.ax_std)
       << std::setw(16) << pair(s.ay_mean, s.ay_std) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Corpus directory: scenes.jsonl plus corpus.json (domain, split, stats).

inline void write_corpus(const DomainCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "scenes.jsonl", std::ios::binary);
    if (!os) throw DataError("cannot write " + (dir / "scenes.jsonl").string());
    write_scenes(os, corpus.scenes);
  }
  json meta{{"domain_id", corpus.domain_id},
            {"split", {{"train", corpus.n_train}, {"val", corpus.n_val}, {"test", corpus.n_test}}},
            {"stats", corpus.stats}};
  std::ofstream os(dir / "corpus.json", std::ios::binary);
  if (!os) throw DataError("cannot write " + (dir / "corpus.json").string());
  os << meta.dump(2) << '\n';
}

inline DomainCorpus read_corpus(const std::filesystem::path& dir) {
  DomainCorpus corpus;
  std::ifstream scenes(dir / "scenes.jsonl", std::ios::binary);
  if (!scenes) throw DataError("cannot read " + (dir / "scenes.jsonl").string());
  corpus.scenes = read_scenes(scenes);
  std::ifstream meta_in(dir / "corpus.json", std::ios::binary);
  if (meta_in) {
    json meta;
    try {
      meta = json::parse(meta_in);
      corpus.domain_id = meta.at("domain_id").get<DomainId>();
      corpus.n_train = meta.at("split").at("train").get<std::size_t>();
      corpus.n_val = meta.at("split").at("val").get<std::size_t>();
      corpus.n_test = meta.at("split").at("test").get<std::size_t>();
      corpus.stats = meta.at("stats").get<DomainStats>();
    } catch (const json::exception& e) {
      throw DataError("corpus.json: " + std::string(e.what()));
    }
    const std::size_t assigned = corpus.n_train + corpus.n_val + corpus.n_test;
    if (assigned != 0 && assigned != corpus.scenes.size()) {
      throw DataError("corpus.json: split does not cover the scenes");
    }
  } else {
    if (corpus.scenes.empty()) throw DataError("corpus has no scenes: " + dir.string());
    corpus.domain_id = corpus.scenes.front().domain_id;
    chronological_split(corpus);
    corpus.stats = compute_domain_statistics(corpus);
  }
  return corpus;
}

}  // namespace adaptraj
