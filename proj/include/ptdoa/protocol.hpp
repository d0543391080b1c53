#ifndef PTDOA_PROTOCOL_HPP
#define PTDOA_PROTOCOL_HPP

#include <random>
#include <vector>

#include "ptdoa/scenario.hpp"

namespace ptdoa {

/// Payload an anchor broadcasts at the start of its slot.
struct BroadcastMessage {
  std::size_t anchor = 0;
  std::size_t frame = 0;
  double tx_local = 0.0;         // noisy transmit timestamp, anchor clock
  double offset_estimate = 0.0;  // estimated anchor clock offset at transmit
  double offset_sigma = 0.0;
  Vector reported_position;
  Matrix position_covariance;
};

/// What the target records when a broadcast arrives.
struct ReceptionRecord {
  std::size_t anchor = 0;
  std::size_t frame = 0;
  double rx_local = 0.0;        // noisy receive timestamp, target clock
  double true_rx_global = 0.0;  // ground truth, never used by estimators
};

/// Everything observed over one multi-frame campaign, frame-major.
struct CampaignLog {
  Scenario scenario;
  std::vector<BroadcastMessage> messages;
  std::vector<ReceptionRecord> receptions;
  std::vector<Vector> frame_start_positions;

  [[nodiscard]] std::size_t frames() const { return scenario.timing.frames; }
  [[nodiscard]] std::size_t anchors() const { return scenario.anchors.size(); }
  [[nodiscard]] const BroadcastMessage& message(std::size_t frame, std::size_t anchor) const;
  [[nodiscard]] const ReceptionRecord& reception(std::size_t frame, std::size_t anchor) const;

  /// Target-clock reading at the start of each frame (global t = m T_f).
  [[nodiscard]] std::vector<double> frame_start_local_times() const;
  /// Ground-truth TDOA of a pair at a target-local instant.
  [[nodiscard]] double true_tdoa_at_local(AnchorPair pair, double target_local) const;
};

/// Runs the periodic broadcast protocol. Range is evaluated at the transmit instant.
CampaignLog simulate_campaign(const Scenario& scenario, std::mt19937_64& rng);

/// Same-frame difference of offset-corrected one-way delays; biased for moving targets.
[[nodiscard]] double naive_same_frame_tdoa(const CampaignLog& log, AnchorPair pair, std::size_t frame);

}  // namespace ptdoa

#endif  // PTDOA_PROTOCOL_HPP
