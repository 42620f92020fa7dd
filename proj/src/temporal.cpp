#include "carm/temporal.hpp"

#include "carm/ks.hpp"

#include <algorithm>
#include <cmath>

namespace carm {

std::string_view marginal_name(Marginal m) {
  switch (m) {
    case Marginal::X: return "x";
    case Marginal::Y: return "y";
    case Marginal::Z: return "z";
    case Marginal::Confidence: return "rho";
    case Marginal::Visibility: return "v";
    case Marginal::InvErr: return "inv_err";
  }
  return "?";
}

double marginal_value(const ScoredKeypoint3D& entry, Marginal m) {
  switch (m) {
    case Marginal::X: return entry.position.x();
    case Marginal::Y: return entry.position.y();
    case Marginal::Z: return entry.position.z();
    case Marginal::Confidence: return entry.score.confidence;
    case Marginal::Visibility: return entry.score.visibility;
    case Marginal::InvErr: return entry.score.inv_err;
  }
  return 0.0;
}

void DriftConfig::validate() const {
  if (window_size < 2 || stat_size < 1 || 2 * stat_size > window_size || !(alpha > 0.0) ||
      !(alpha < 1.0)) {
    throw Error(Errc::InvalidArgument, "drift window needs 2 * stat_size <= window_size");
  }
}

void DriftWindow::push(const ScoredKeypoint3D& entry) {
  if (!buffer.empty() && entry.timestep <= buffer.back().timestep) {
    throw Error(Errc::InvalidArgument, "drift window entries must be timestep-ordered");
  }
  buffer.push_back(entry);
  while (static_cast<int>(buffer.size()) > config.window_size) buffer.pop_front();
}

std::size_t best_split(std::span<const std::vector<double>> series, std::size_t min_segment) {
  if (series.empty()) return 0;
  const std::size_t n = series.front().size();
  min_segment = std::max<std::size_t>(min_segment, 1);
  std::vector<double> score(n + 1, 0.0);  // strongest single-series change
  for (const auto& values : series) {
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + values[i];
    const double mean = prefix[n] / static_cast<double>(n);
    double total = 0.0;
    for (double v : values) total += (v - mean) * (v - mean);
    if (!(total > 1e-12 * (1.0 + mean * mean) * static_cast<double>(n))) continue;
    for (std::size_t s = min_segment; s + min_segment <= n; ++s) {
      const double na = static_cast<double>(s);
      const double nb = static_cast<double>(n - s);
      const double gap = prefix[s] / na - (prefix[n] - prefix[s]) / nb;
      score[s] = std::max(score[s], na * nb / (na + nb) * gap * gap / total);
    }
  }
  std::size_t best = n / 2;
  double best_score = -1.0;
  for (std::size_t s = min_segment; s + min_segment <= n; ++s) {
    if (score[s] >= best_score) {
      best_score = score[s];
      best = s;
    }
  }
  return best;
}

std::size_t best_split(std::span<const double> values, std::size_t min_segment) {
  const std::vector<std::vector<double>> one{{values.begin(), values.end()}};
  return best_split(std::span<const std::vector<double>>(one), min_segment);
}

ConceptPartition detect_drift(const DriftWindow& window) {
  const auto& buf = window.buffer;
  const auto ns = static_cast<std::size_t>(window.config.stat_size);
  if (buf.size() < 2 * ns) {
    throw Error(Errc::InsufficientHistory, "drift test needs 2 * stat_size entries");
  }
  ConceptPartition part;
  const double threshold = window.config.alpha / kNumMarginals;
  std::vector<double> ref(ns);
  std::vector<double> test(ns);
  for (int mi = 0; mi < kNumMarginals; ++mi) {
    const auto m = static_cast<Marginal>(mi);
    for (std::size_t i = 0; i < ns; ++i) {
      ref[i] = marginal_value(buf[i], m);
      test[i] = marginal_value(buf[buf.size() - ns + i], m);
    }
    const double p = stats::ks_two_sample(ref, test).p_value;
    part.p_values[static_cast<std::size_t>(mi)] = p;
    if (p < part.min_p_value) {
      part.min_p_value = p;
      part.drift_marginal = m;
    }
  }
  part.drift_detected = part.min_p_value < threshold;
  if (!part.drift_detected) {
    part.drift_marginal.reset();
    part.pre.assign(buf.begin(), buf.end());
    return part;
  }
  std::vector<std::vector<double>> series(kNumMarginals);
  for (int mi = 0; mi < kNumMarginals; ++mi) {
    for (const auto& e : buf) {
      series[static_cast<std::size_t>(mi)].push_back(marginal_value(e, static_cast<Marginal>(mi)));
    }
  }
  const std::size_t split = best_split(std::span<const std::vector<double>>(series), 1);
  part.pre.assign(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(split));
  part.post.assign(buf.begin() + static_cast<std::ptrdiff_t>(split), buf.end());
  return part;
}

void ReliabilityThresholds::validate() const {
  if (!(rho_min >= 0 && rho_min <= 1 && vis_min >= 0 && vis_min <= 1 && reproj_max >= 0 &&
        motion_min >= 0)) {
    throw Error(Errc::InvalidArgument, "reliability thresholds out of range");
  }
}

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

template <typename Fn>
double median_of(std::span<const ScoredKeypoint3D> entries, Fn fn) {
  std::vector<double> v;
  v.reserve(entries.size());
  for (const auto& e : entries) v.push_back(fn(e));
  return median(std::move(v));
}

Vec3 centroid(std::span<const ScoredKeypoint3D> entries) {
  Vec3 c = Vec3::Zero();
  for (const auto& e : entries) c += e.position;
  return c / static_cast<double>(entries.size());
}

// Highest composite score; later entries win ties.
const ScoredKeypoint3D& best_entry(std::span<const ScoredKeypoint3D> entries,
                                   const ReliabilityThresholds& thresholds) {
  const ScoredKeypoint3D* best = &entries.front();
  double best_score = composite_score(*best, thresholds);
  for (const auto& e : entries.subspan(1)) {
    const double s = composite_score(e, thresholds);
    if (s >= best_score) {
      best = &e;
      best_score = s;
    }
  }
  return *best;
}

}  // namespace

bool concept_reliable(std::span<const ScoredKeypoint3D> entries,
                      const ReliabilityThresholds& thresholds) {
  if (entries.empty()) throw Error(Errc::EmptyInput, "empty concept");
  const double rho = median_of(entries, [](const auto& e) { return e.score.confidence; });
  const double vis = median_of(entries, [](const auto& e) { return e.score.visibility; });
  const double err = median_of(entries, [](const auto& e) { return 1.0 / e.score.inv_err; });
  return rho >= thresholds.rho_min && vis >= thresholds.vis_min && err <= thresholds.reproj_max;
}

double composite_score(const ScoredKeypoint3D& entry, const ReliabilityThresholds& thresholds) {
  return entry.score.confidence * entry.score.visibility *
         std::min(1.0, entry.score.inv_err * thresholds.reproj_max);
}

std::string_view adopted_name(AdoptedConcept c) {
  switch (c) {
    case AdoptedConcept::Whole: return "whole";
    case AdoptedConcept::Pre: return "pre";
    case AdoptedConcept::Post: return "post";
  }
  return "?";
}

Consolidation consolidate(const DriftWindow& window, const ReliabilityThresholds& thresholds) {
  if (window.buffer.empty()) throw Error(Errc::EmptyInput, "empty drift window");
  Consolidation out;
  if (window.buffer.size() >= 2 * static_cast<std::size_t>(window.config.stat_size)) {
    out.partition = detect_drift(window);
  } else {
    out.partition.pre.assign(window.buffer.begin(), window.buffer.end());
  }
  if (!out.partition.drift_detected) {
    out.adopted = AdoptedConcept::Whole;
    out.output = best_entry(out.partition.pre, thresholds);
    return out;
  }
  const auto& pre = out.partition.pre;
  const auto& post = out.partition.post;
  const bool pre_ok = concept_reliable(pre, thresholds);
  const bool post_ok = concept_reliable(post, thresholds);
  if (pre_ok != post_ok) {
    out.adopted = pre_ok ? AdoptedConcept::Pre : AdoptedConcept::Post;
    out.reason = AdoptionReason::Reliability;
  } else if ((centroid(pre) - centroid(post)).norm() >= thresholds.motion_min) {
    out.adopted = AdoptedConcept::Post;
    out.reason = AdoptionReason::Motion;
  } else {
    out.reason = AdoptionReason::Composite;
    auto score = [&](const ScoredKeypoint3D& e) { return composite_score(e, thresholds); };
    out.adopted = median_of(post, score) >= median_of(pre, score) ? AdoptedConcept::Post
                                                                   : AdoptedConcept::Pre;
  }
  out.output = best_entry(out.adopted == AdoptedConcept::Pre ? pre : post, thresholds);
  return out;
}

JointConsolidator::JointConsolidator(JointId joint, DriftConfig config,
                                     ReliabilityThresholds thresholds)
    : thresholds_(thresholds) {
  config.validate();
  thresholds.validate();
  window_.joint = joint;
  window_.config = config;
}

Consolidation JointConsolidator::push(const ScoredKeypoint3D& entry) {
  window_.push(entry);
  Consolidation result = consolidate(window_, thresholds_);
  if (result.partition.drift_detected) {
    events_.push_back({entry.timestep, window_.joint, *result.partition.drift_marginal,
                       result.partition.min_p_value});
    // Only a change of state retires the older concept; a score preference
    // alone keeps the history for later tests.
    if (result.adopted == AdoptedConcept::Post && result.reason != AdoptionReason::Composite) {
      const std::size_t drop = result.partition.pre.size();
      window_.buffer.erase(window_.buffer.begin(),
                           window_.buffer.begin() + static_cast<std::ptrdiff_t>(drop));
    }
  }
  return result;
}

}  // namespace carm
