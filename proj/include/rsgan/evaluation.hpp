#pragma once

// Swap-twice consistency benchmark over random test pairs, with a report in
// the layout of the usual identity / consistency table.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rsgan/applications.hpp"
#include "rsgan/metrics.hpp"
#include "rsgan/sample.hpp"

namespace rsgan {

/// swap(source, target): source's face in target's context.
using Swapper = std::function<Image(const Image& source, const Image& target)>;
using Reconstructor = std::function<Image(const Image&)>;

/// Leaves the target untouched.
inline Image target_swapper(const Image&, const Image& target) { return target; }
/// Returns the source unchanged.
inline Image source_swapper(const Image& source, const Image&) { return source; }

inline Swapper model_swapper(const InferenceModel& m) {
  return [&m](const Image& s, const Image& t) { return swap(m, s, t); };
}
inline Reconstructor model_reconstructor(const InferenceModel& m) {
  return [&m](const Image& x) { return reconstruct(m, x); };
}

/// Swap both ways, then swap the results back. Returns (x1'', x2'').
inline std::pair<Image, Image> swap_twice(const Image& x1, const Image& x2, const Swapper& swapper) {
  const Image y1 = swapper(x1, x2);  // face 1, hair 2
  const Image y2 = swapper(x2, x1);  // face 2, hair 1
  return {swapper(y1, y2), swapper(y2, y1)};
}

/// Running mean / variance (Welford) with the parallel merge rule.
struct RunningStat {
  std::int64_t n = 0;
  double mean = 0, m2 = 0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  void merge(const RunningStat& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const auto na = static_cast<double>(n), nb = static_cast<double>(o.n);
    const double d = o.mean - mean;
    mean += d * nb / (na + nb);
    m2 += o.m2 + d * d * na * nb / (na + nb);
    n += o.n;
  }
  /// Population standard deviation.
  double stddev() const { return n > 0 ? std::sqrt(std::max(0.0, m2 / static_cast<double>(n))) : 0.0; }

  nlohmann::json to_json() const {
    if (n == 0) return nullptr;
    return {{"mean", mean}, {"std", stddev()}, {"n", n}};
  }
};

struct MethodRow {
  std::string method;
  RunningStat identity_swap, abs_err_recon, abs_err_swap2, msssim_recon, msssim_swap2;
  std::int64_t skipped_pairs = 0;      // swapper failed
  std::int64_t identity_failures = 0;  // embedder failed; pair kept for the other columns
};

struct MetricReport {
  std::vector<MethodRow> rows;
  std::int64_t n_pairs = 0;
  std::uint64_t seed = 0;
  int msssim_levels = 0;
  std::vector<double> msssim_weights;
  bool msssim_luma = true;
  std::string embedder;

  nlohmann::json to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows)
      rs.push_back({{"method", r.method},
                    {"identity_swap", r.identity_swap.to_json()},
                    {"abs_err_recon", r.abs_err_recon.to_json()},
                    {"abs_err_swap2", r.abs_err_swap2.to_json()},
                    {"msssim_recon", r.msssim_recon.to_json()},
                    {"msssim_swap2", r.msssim_swap2.to_json()},
                    {"skipped_pairs", r.skipped_pairs},
                    {"identity_failures", r.identity_failures}});
    return {{"n_pairs", n_pairs},
            {"seed", seed},
            {"rows", rs},
            {"metadata",
             {{"msssim_levels", msssim_levels},
              {"msssim_weights", msssim_weights},
              {"msssim_input", msssim_luma ? "luma" : "rgb"},
              {"embedder", embedder}}}};
  }
};

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> c = {"Method",          "OpenFace Swap",   "Abs. Errors Recon.",
                                             "Abs. Errors Swap ×2", "MS-SSIM Recon.", "MS-SSIM Swap ×2"};
  return c;
}

namespace eval_detail {

inline std::string fmt(const RunningStat& s, bool std_row) {
  if (s.n == 0) return "-";
  std::ostringstream o;
  o << std::fixed << std::setprecision(3) << (std_row ? s.stddev() : s.mean);
  return o.str();
}

inline std::vector<std::vector<std::string>> table(const MetricReport& r) {
  std::vector<std::vector<std::string>> t{report_columns()};
  for (const auto& row : r.rows)
    for (bool sd : {false, true})
      t.push_back({row.method + (sd ? " (std)" : " (mean)"), fmt(row.identity_swap, sd), fmt(row.abs_err_recon, sd),
                   fmt(row.abs_err_swap2, sd), fmt(row.msssim_recon, sd), fmt(row.msssim_swap2, sd)});
  return t;
}

// Display width, counting the multiplication sign as one column.
inline std::size_t width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

}  // namespace eval_detail

/// Aligned plain-text table, two header rows grouping the paired columns.
inline std::string report_text(const MetricReport& r) {
  using eval_detail::width;
  const auto t = eval_detail::table(r);
  std::vector<std::size_t> w(t[0].size(), 0);
  std::vector<std::vector<std::string>> body = t;
  body[0] = {"Method", "OpenFace", "Abs. Errors", "", "MS-SSIM", ""};
  body.insert(body.begin() + 1, {"", "Swap", "Recon.", "Swap ×2", "Recon.", "Swap ×2"});
  for (const auto& row : body)
    for (std::size_t c = 0; c < row.size(); ++c) w[c] = std::max(w[c], width(row[c]));
  std::ostringstream o;
  for (std::size_t i = 0; i < body.size(); ++i) {
    for (std::size_t c = 0; c < body[i].size(); ++c) {
      const auto& cell = body[i][c];
      const std::string pad(w[c] - width(cell), ' ');
      o << (c == 0 ? cell + pad : "  " + pad + cell);
    }
    o << '\n';
    if (i == 1) {
      std::size_t total = w[0];
      for (std::size_t c = 1; c < w.size(); ++c) total += 2 + w[c];
      o << std::string(total, '-') << '\n';
    }
  }
  o << "pairs " << r.n_pairs << ", seed " << r.seed << ", MS-SSIM levels " << r.msssim_levels << " ("
    << (r.msssim_luma ? "luma" : "rgb") << ")";
  for (const auto& row : r.rows)
    if (row.skipped_pairs || row.identity_failures)
      o << ", " << row.method << " skipped " << row.skipped_pairs << " identity failures " << row.identity_failures;
  o << '\n';
  return o.str();
}

inline std::string report_csv(const MetricReport& r) {
  std::ostringstream o;
  for (const auto& row : eval_detail::table(r)) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) o << ',';
      const bool quote = row[c].find_first_of(",\"") != std::string::npos;
      if (quote) {
        o << '"';
        for (char ch : row[c]) o << (ch == '"' ? "\"\"" : std::string(1, ch));
        o << '"';
      } else {
        o << row[c];
      }
    }
    o << '\n';
  }
  return o.str();
}

struct BenchmarkMethod {
  std::string name;
  Swapper swapper;
  Reconstructor reconstructor;  // empty: recon columns left blank
};

struct BenchmarkOptions {
  std::int64_t n_pairs = 1000;
  std::uint64_t seed = 0;
  MsSsimOptions msssim;
};

/// n distinct unordered pairs (i < j) of [0, count), deterministic in seed.
inline std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(std::size_t count, std::int64_t n,
                                                                      std::uint64_t seed) {
  if (n <= 0) throw MetricError("n_pairs must be positive");
  const auto available = count < 2 ? 0 : static_cast<long double>(count) * (count - 1) / 2;
  if (static_cast<long double>(n) > available)
    throw MetricError("n_pairs " + std::to_string(n) + " exceeds the " +
                      std::to_string(static_cast<unsigned long long>(available)) + " available pairs");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, count - 1);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  while (static_cast<std::int64_t>(out.size()) < n) {
    std::size_t a = pick(rng), b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (seen.insert({a, b}).second) out.emplace_back(a, b);
  }
  return out;
}

/// Evaluates each method on the same pairs. Both images of a pair contribute
/// one sample per column.
inline MetricReport run_benchmark(const std::vector<Image>& images, const std::vector<BenchmarkMethod>& methods,
                                  const IdentityEmbedder& embedder, const BenchmarkOptions& opt) {
  if (images.empty()) throw MetricError("test split is empty");
  const auto pairs = sample_pairs(images.size(), opt.n_pairs, opt.seed);
  MetricReport rep;
  rep.n_pairs = opt.n_pairs;
  rep.seed = opt.seed;
  rep.msssim_levels = ms_ssim_levels(height(images[0]), width(images[0]), opt.msssim.levels);
  rep.msssim_weights = ms_ssim_weights(rep.msssim_levels);
  rep.msssim_luma = opt.msssim.luma;
  rep.embedder = embedder.name();
  for (const auto& m : methods) {
    MethodRow row;
    row.method = m.name;
    for (const auto& [i, j] : pairs) {
      const Image& x1 = images[i];
      const Image& x2 = images[j];
      Image y1, y2, z1, z2;
      try {
        y1 = m.swapper(x1, x2);
        y2 = m.swapper(x2, x1);
        z1 = m.swapper(y1, y2);
        z2 = m.swapper(y2, y1);
      } catch (const std::exception&) {
        ++row.skipped_pairs;
        continue;
      }
      try {
        const double d1 = identity_distance(x1, y1, embedder), d2 = identity_distance(x2, y2, embedder);
        row.identity_swap.add(d1);
        row.identity_swap.add(d2);
      } catch (const std::exception&) {
        ++row.identity_failures;
      }
      row.abs_err_swap2.add(abs_error(x1, z1));
      row.abs_err_swap2.add(abs_error(x2, z2));
      row.msssim_swap2.add(ms_ssim(x1, z1, opt.msssim));
      row.msssim_swap2.add(ms_ssim(x2, z2, opt.msssim));
      if (m.reconstructor) {
        for (const Image* x : {&x1, &x2}) {
          const Image r = m.reconstructor(*x);
          row.abs_err_recon.add(abs_error(*x, r));
          row.msssim_recon.add(ms_ssim(*x, r, opt.msssim));
        }
      }
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace rsgan
