#pragma once

#include "carm/triangulation.hpp"

#include <array>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace carm {

/// Feature dimensions tested for drift.
enum class Marginal { X = 0, Y, Z, Confidence, Visibility, InvErr };
inline constexpr int kNumMarginals = 6;
std::string_view marginal_name(Marginal m);
double marginal_value(const ScoredKeypoint3D& entry, Marginal m);

struct DriftConfig {
  int window_size = 25;
  int stat_size = 10;
  double alpha = 0.05;

  void validate() const;
};

/// Rolling per-joint history of scored keypoints, oldest first.
struct DriftWindow {
  JointId joint{};
  DriftConfig config;
  std::deque<ScoredKeypoint3D> buffer;

  /// Appends and evicts the oldest entry beyond the window size. Entries must
  /// arrive in increasing timestep order.
  void push(const ScoredKeypoint3D& entry);
};

struct ConceptPartition {
  std::vector<ScoredKeypoint3D> pre;
  std::vector<ScoredKeypoint3D> post;
  bool drift_detected = false;
  std::optional<Marginal> drift_marginal;
  double min_p_value = 1.0;
  std::array<double, kNumMarginals> p_values{};
};

/// KS test of the oldest vs newest `stat_size` entries on every marginal,
/// Bonferroni-corrected. On drift the buffer is split at the joint change
/// point of all marginals. Throws InsufficientHistory below 2 * stat_size.
ConceptPartition detect_drift(const DriftWindow& window);

/// Least-squares change point over several equally long series: index s in
/// (0, n) where some series has the largest fraction of its variance explained
/// by splitting it into [0, s) and [s, n). Constant series are ignored; ties
/// go to the later index. Both parts keep at least `min_segment` entries.
std::size_t best_split(std::span<const std::vector<double>> series, std::size_t min_segment);
std::size_t best_split(std::span<const double> values, std::size_t min_segment);

struct ReliabilityThresholds {
  double rho_min = 0.5;
  double vis_min = 0.5;
  double reproj_max = 8.0;  // px
  double motion_min = 50.0;  // mm

  void validate() const;
};

bool concept_reliable(std::span<const ScoredKeypoint3D> entries,
                      const ReliabilityThresholds& thresholds);

/// rho * v * min(1, inv_err * reproj_max).
double composite_score(const ScoredKeypoint3D& entry, const ReliabilityThresholds& thresholds);

enum class AdoptedConcept { Whole, Pre, Post };
std::string_view adopted_name(AdoptedConcept c);

/// Which rule chose the adopted concept.
enum class AdoptionReason { NoDrift, Reliability, Motion, Composite };

struct Consolidation {
  ScoredKeypoint3D output;
  AdoptedConcept adopted = AdoptedConcept::Whole;
  AdoptionReason reason = AdoptionReason::NoDrift;
  ConceptPartition partition;
};

/// Picks the reliable concept of the window and returns its best entry.
Consolidation consolidate(const DriftWindow& window, const ReliabilityThresholds& thresholds);

struct DriftEvent {
  int timestep = 0;
  JointId joint{};
  Marginal marginal{};
  double p_value = 1.0;
};

/// Streaming driver for one joint: pushes entries into its window,
/// consolidates, and forgets the superseded concept after a reliability or
/// motion switch to the newer one.
class JointConsolidator {
 public:
  JointConsolidator(JointId joint, DriftConfig config, ReliabilityThresholds thresholds);

  Consolidation push(const ScoredKeypoint3D& entry);

  [[nodiscard]] const DriftWindow& window() const { return window_; }
  [[nodiscard]] const std::vector<DriftEvent>& events() const { return events_; }

 private:
  DriftWindow window_;
  ReliabilityThresholds thresholds_;
  std::vector<DriftEvent> events_;
};

}  // namespace carm
