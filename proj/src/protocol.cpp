#include "ptdoa/protocol.hpp"

namespace ptdoa {

const BroadcastMessage& CampaignLog::message(std::size_t frame, std::size_t anchor) const {
  if (frame >= frames() || anchor >= anchors()) throw InvalidArgument("no such broadcast record");
  return messages[frame * anchors() + anchor];
}

const ReceptionRecord& CampaignLog::reception(std::size_t frame, std::size_t anchor) const {
  if (frame >= frames() || anchor >= anchors()) throw InvalidArgument("no such reception record");
  return receptions[frame * anchors() + anchor];
}

std::vector<double> CampaignLog::frame_start_local_times() const {
  std::vector<double> out(frames());
  for (std::size_t m = 0; m < frames(); ++m) {
    out[m] = local_time(scenario.target_clock, static_cast<double>(m) * scenario.timing.frame_length);
  }
  return out;
}

double CampaignLog::true_tdoa_at_local(AnchorPair pair, double target_local) const {
  if (pair.i >= anchors() || pair.j >= anchors()) throw InvalidArgument("anchor index out of range");
  const double t = global_time(scenario.target_clock, target_local);
  return true_tdoa(scenario.anchors[pair.i], scenario.anchors[pair.j], scenario.trajectory, t);
}

CampaignLog simulate_campaign(const Scenario& scenario, std::mt19937_64& rng) {
  scenario.validate();
  const auto& noise = scenario.noise;
  const std::size_t n_frames = scenario.timing.frames;
  const std::size_t n_anchors = scenario.anchors.size();

  CampaignLog log;
  log.scenario = scenario;
  log.messages.reserve(n_frames * n_anchors);
  log.receptions.reserve(n_frames * n_anchors);

  std::normal_distribution<double> gauss;
  auto draw = [&](double sigma) { return sigma > 0.0 ? sigma * gauss(rng) : 0.0; };

  for (std::size_t m = 0; m < n_frames; ++m) {
    log.frame_start_positions.push_back(
        position_at(scenario.trajectory, static_cast<double>(m) * scenario.timing.frame_length));
    for (const auto& anchor : scenario.anchors) {
      const double t_tx = scenario.timing.transmit_time(m, anchor.id);

      BroadcastMessage msg;
      msg.anchor = anchor.id;
      msg.frame = m;
      msg.tx_local = local_time(anchor.clock, t_tx) + draw(noise.sigma_t);
      msg.offset_estimate = offset_at(anchor.clock, t_tx) + draw(anchor.offset_sigma);
      msg.offset_sigma = anchor.offset_sigma;
      msg.reported_position = anchor.reported_position;
      msg.position_covariance = anchor.position_covariance;

      ReceptionRecord rec;
      rec.anchor = anchor.id;
      rec.frame = m;
      rec.true_rx_global = t_tx + true_toa(anchor, scenario.trajectory, t_tx);
      rec.rx_local = local_time(scenario.target_clock, rec.true_rx_global) + draw(noise.sigma_r);

      log.messages.push_back(std::move(msg));
      log.receptions.push_back(rec);
    }
  }
  return log;
}

double naive_same_frame_tdoa(const CampaignLog& log, AnchorPair pair, std::size_t frame) {
  const auto& mi = log.message(frame, pair.i);
  const auto& mj = log.message(frame, pair.j);
  const auto& ri = log.reception(frame, pair.i);
  const auto& rj = log.reception(frame, pair.j);
  return (ri.rx_local - mi.tx_local + mi.offset_estimate) -
         (rj.rx_local - mj.tx_local + mj.offset_estimate);
}

}  // namespace ptdoa
