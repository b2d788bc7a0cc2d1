#pragma once

// Shared pieces of the synthetic-factor experiment: a toy training run and
// the hue-transfer measurement on held-out swaps.

#include <algorithm>
#include <cmath>
#include <vector>

#include "rsgan/applications.hpp"
#include "rsgan/dataset.hpp"
#include "rsgan/synth.hpp"
#include "rsgan/trainer.hpp"

namespace toy {

struct HueTransfer {
  int pairs = 0;
  int passed = 0;
  int undefined = 0;  // a probe had no chroma
  std::vector<double> face_err, hair_err;
  double rate() const { return pairs ? double(passed) / pairs : 0.0; }
};

/// Swaps test[i] (face donor) into test[i + n] (hair recipient) and checks the
/// output's probe hues against the donor's face hue and recipient's hair hue.
inline HueTransfer hue_transfer(const rsgan::InferenceModel& m, const std::vector<rsgan::RegionSample>& test,
                                const std::vector<rsgan::SynthSpec>& specs, int n_pairs, double tol_deg = 15.0) {
  const auto probes = rsgan::synth_probes(m.resolution());
  HueTransfer r;
  for (int i = 0; i < n_pairs; ++i) {
    const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(i + n_pairs);
    const auto out = rsgan::swap(m, test[a].x, test[b].x);
    const double fh = rsgan::mean_hue(out, probes.face), hh = rsgan::mean_hue(out, probes.hair);
    ++r.pairs;
    if (std::isnan(fh) || std::isnan(hh)) {
      ++r.undefined;
      r.face_err.push_back(180);
      r.hair_err.push_back(180);
      continue;
    }
    const double ef = std::abs(rsgan::hue_difference(fh, specs[a].face_hue));
    const double eh = std::abs(rsgan::hue_difference(hh, specs[b].hair_hue));
    r.face_err.push_back(ef);
    r.hair_err.push_back(eh);
    if (ef < tol_deg && eh < tol_deg) ++r.passed;
  }
  return r;
}

}  // namespace toy
