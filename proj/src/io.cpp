#include "ptdoa/io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace ptdoa {
namespace {

constexpr const char* kScenarioPrefix = "# scenario: ";

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

Vector vector_from(const Json& j) {
  if (!j.is_array()) throw InvalidArgument("expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  return v;
}

Json matrix_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

Matrix matrix_from(const Json& j) {
  if (!j.is_array()) throw InvalidArgument("expected an array of rows");
  if (j.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from(j[r]);
    if (row.size() != m.cols()) throw InvalidArgument("ragged matrix rows");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Json clock_json(const ClockModel& c) { return {{"drift", c.drift}, {"offset", c.offset}}; }

ClockModel clock_from(const Json& j) { return {j.at("drift").get<double>(), j.at("offset").get<double>()}; }

Json timing_json(const ProtocolTiming& t) {
  return {{"frame_length", t.frame_length}, {"slot_length", t.slot_length}, {"slots", t.slots}, {"frames", t.frames}};
}

void read_timing(ProtocolTiming& t, const Json& j) {
  static const std::set<std::string> keys{"frame_length", "slot_length", "slots", "frames"};
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw InvalidArgument("unknown timing key: " + key);
  }
  if (j.contains("frame_length")) t.frame_length = j["frame_length"].get<double>();
  if (j.contains("slot_length")) t.slot_length = j["slot_length"].get<double>();
  if (j.contains("slots")) t.slots = j["slots"].get<std::size_t>();
  if (j.contains("frames")) t.frames = j["frames"].get<std::size_t>();
}

Json motion_json(const Motion& motion) {
  struct Visitor {
    Json operator()(const StaticMotion&) const { return {{"type", "static"}}; }
    Json operator()(const LinearMotion& m) const { return {{"type", "linear"}, {"velocity", vector_json(m.velocity)}}; }
    Json operator()(const CircularMotion& m) const {
      return {{"type", "circular"}, {"speed", m.speed}, {"radius", m.radius},
              {"heading", vector_json(m.heading)}, {"normal", vector_json(m.normal)}};
    }
    Json operator()(const AcceleratedMotion& m) const {
      return {{"type", "accelerated"}, {"velocity", vector_json(m.velocity)},
              {"acceleration", vector_json(m.acceleration)}};
    }
  };
  return std::visit(Visitor{}, motion);
}

Motion motion_from(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "static") return StaticMotion{};
  if (type == "linear") return LinearMotion{vector_from(j.at("velocity"))};
  if (type == "circular") {
    return CircularMotion{j.at("speed").get<double>(), j.at("radius").get<double>(), vector_from(j.at("heading")),
                          vector_from(j.at("normal"))};
  }
  if (type == "accelerated") {
    return AcceleratedMotion{vector_from(j.at("velocity")), vector_from(j.at("acceleration"))};
  }
  throw InvalidArgument("unknown motion type: " + type);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::size_t parse_index(const std::string& text) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw InvalidArgument("bad integer field: " + text);
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("number formatting failed");
  return {buf, ptr};
}

double parse_double(const std::string& text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw InvalidArgument("bad numeric field: " + text);
  return value;
}

const char* motion_name(MotionKind kind) {
  switch (kind) {
    case MotionKind::Static: return "static";
    case MotionKind::Linear: return "linear";
    case MotionKind::Circular: return "circular";
    case MotionKind::Accelerated: return "accelerated";
  }
  return "unknown";
}

MotionKind parse_motion_kind(const std::string& name) {
  for (auto kind : {MotionKind::Static, MotionKind::Linear, MotionKind::Circular, MotionKind::Accelerated}) {
    if (name == motion_name(kind)) return kind;
  }
  throw InvalidArgument("unknown motion kind: " + name);
}

Json to_json(const ScenarioConfig& c) {
  Json anchors = Json::array();
  for (const auto& p : c.anchor_positions) anchors.push_back(vector_json(p));
  return {{"dimension", c.dimension},
          {"anchor_count", c.anchor_count},
          {"area_side", c.area_side},
          {"timing", timing_json(c.timing)},
          {"drift_bound_ppm", c.drift_bound_ppm},
          {"offset_bound", c.offset_bound},
          {"ideal_target_clock", c.ideal_target_clock},
          {"ideal_anchor_clocks", c.ideal_anchor_clocks},
          {"sigma_t_m", c.sigma_t_m},
          {"sigma_r_m", c.sigma_r_m},
          {"sigma_phi", c.sigma_phi},
          {"sigma_p", c.sigma_p},
          {"motion", motion_name(c.motion)},
          {"v_max", c.v_max},
          {"r_max", c.r_max},
          {"a_max", c.a_max},
          {"anchor_positions", anchors}};
}

void apply_overrides(ScenarioConfig& c, const Json& j) {
  if (!j.is_object()) throw InvalidArgument("scenario config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "dimension") c.dimension = value.get<int>();
    else if (key == "anchor_count") c.anchor_count = value.get<std::size_t>();
    else if (key == "area_side") c.area_side = value.get<double>();
    else if (key == "timing") read_timing(c.timing, value);
    else if (key == "drift_bound_ppm") c.drift_bound_ppm = value.get<double>();
    else if (key == "offset_bound") c.offset_bound = value.get<double>();
    else if (key == "ideal_target_clock") c.ideal_target_clock = value.get<bool>();
    else if (key == "ideal_anchor_clocks") c.ideal_anchor_clocks = value.get<bool>();
    else if (key == "sigma_t_m") c.sigma_t_m = value.get<double>();
    else if (key == "sigma_r_m") c.sigma_r_m = value.get<double>();
    else if (key == "sigma_phi") c.sigma_phi = value.get<double>();
    else if (key == "sigma_p") c.sigma_p = value.get<double>();
    else if (key == "motion") c.motion = parse_motion_kind(value.get<std::string>());
    else if (key == "v_max") c.v_max = value.get<double>();
    else if (key == "r_max") c.r_max = value.get<double>();
    else if (key == "a_max") c.a_max = value.get<double>();
    else if (key == "anchor_positions") {
      c.anchor_positions.clear();
      for (const auto& p : value) c.anchor_positions.push_back(vector_from(p));
    } else {
      throw InvalidArgument("unknown scenario config key: " + key);
    }
  }
}

ScenarioConfig scenario_config_from_json(const Json& j) {
  ScenarioConfig c;
  apply_overrides(c, j);
  c.validate();
  return c;
}

Json to_json(const Scenario& s) {
  Json anchors = Json::array();
  for (const auto& a : s.anchors) {
    anchors.push_back({{"id", a.id},
                       {"true_position", vector_json(a.true_position)},
                       {"reported_position", vector_json(a.reported_position)},
                       {"position_covariance", matrix_json(a.position_covariance)},
                       {"clock", clock_json(a.clock)},
                       {"offset_sigma", a.offset_sigma}});
  }
  return {{"dimension", s.dimension},
          {"anchors", anchors},
          {"target_clock", clock_json(s.target_clock)},
          {"trajectory", {{"initial_position", vector_json(s.trajectory.initial_position)},
                          {"motion", motion_json(s.trajectory.motion)}}},
          {"noise", {{"sigma_t", s.noise.sigma_t}, {"sigma_r", s.noise.sigma_r},
                     {"sigma_phi", s.noise.sigma_phi}, {"sigma_p", s.noise.sigma_p}}},
          {"timing", timing_json(s.timing)}};
}

Scenario scenario_from_json(const Json& j) {
  Scenario s;
  try {
    s.dimension = j.at("dimension").get<int>();
    for (const auto& a : j.at("anchors")) {
      AnchorDef def;
      def.id = a.at("id").get<std::size_t>();
      def.true_position = vector_from(a.at("true_position"));
      def.reported_position = vector_from(a.at("reported_position"));
      def.position_covariance = matrix_from(a.at("position_covariance"));
      def.clock = clock_from(a.at("clock"));
      def.offset_sigma = a.at("offset_sigma").get<double>();
      s.anchors.push_back(std::move(def));
    }
    s.target_clock = clock_from(j.at("target_clock"));
    s.trajectory.initial_position = vector_from(j.at("trajectory").at("initial_position"));
    s.trajectory.motion = motion_from(j.at("trajectory").at("motion"));
    const auto& n = j.at("noise");
    s.noise = {n.at("sigma_t").get<double>(), n.at("sigma_r").get<double>(), n.at("sigma_phi").get<double>(),
               n.at("sigma_p").get<double>()};
    read_timing(s.timing, j.at("timing"));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed scenario: ") + e.what());
  }
  s.validate();
  return s;
}

void write_campaign_csv(std::ostream& out, const CampaignLog& log) {
  const int k = log.scenario.dimension;
  out << kScenarioPrefix << to_json(log.scenario).dump() << '\n';
  out << "frame,anchor,tx_local,rx_local,offset_est,offset_sigma";
  for (int d = 0; d < k; ++d) out << ",pos_" << "xyz"[d];
  out << ",true_rx_global\n";
  for (std::size_t m = 0; m < log.frames(); ++m) {
    for (std::size_t a = 0; a < log.anchors(); ++a) {
      const auto& msg = log.message(m, a);
      const auto& rec = log.reception(m, a);
      out << m << ',' << a << ',' << format_double(msg.tx_local) << ',' << format_double(rec.rx_local) << ','
          << format_double(msg.offset_estimate) << ',' << format_double(msg.offset_sigma);
      for (int d = 0; d < k; ++d) out << ',' << format_double(msg.reported_position[d]);
      out << ',' << format_double(rec.true_rx_global) << '\n';
    }
  }
}

CampaignLog read_campaign_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kScenarioPrefix, 0) != 0) {
    throw InvalidArgument("campaign log must start with a scenario header");
  }
  CampaignLog log;
  log.scenario = scenario_from_json(Json::parse(line.substr(std::char_traits<char>::length(kScenarioPrefix))));
  const int k = log.scenario.dimension;
  if (!std::getline(in, line)) throw InvalidArgument("missing column header");
  const std::size_t columns = 7 + static_cast<std::size_t>(k);
  if (split(line, ',').size() != columns) throw InvalidArgument("unexpected column header: " + line);

  const std::size_t n_frames = log.frames();
  const std::size_t n_anchors = log.anchors();
  log.messages.resize(n_frames * n_anchors);
  log.receptions.resize(n_frames * n_anchors);
  std::vector<bool> seen(n_frames * n_anchors, false);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != columns) throw InvalidArgument("wrong field count in row: " + line);
    const std::size_t m = parse_index(f[0]);
    const std::size_t a = parse_index(f[1]);
    if (m >= n_frames || a >= n_anchors) throw InvalidArgument("row outside the scenario grid: " + line);
    const std::size_t idx = m * n_anchors + a;
    if (seen[idx]) throw InvalidArgument("duplicate row: " + line);
    seen[idx] = true;
    auto& msg = log.messages[idx];
    auto& rec = log.receptions[idx];
    msg.anchor = rec.anchor = a;
    msg.frame = rec.frame = m;
    msg.tx_local = parse_double(f[2]);
    rec.rx_local = parse_double(f[3]);
    msg.offset_estimate = parse_double(f[4]);
    msg.offset_sigma = parse_double(f[5]);
    msg.reported_position.resize(k);
    for (int d = 0; d < k; ++d) msg.reported_position[d] = parse_double(f[6 + static_cast<std::size_t>(d)]);
    msg.position_covariance = log.scenario.anchors[a].position_covariance;
    rec.true_rx_global = parse_double(f[6 + static_cast<std::size_t>(k)]);
  }
  for (bool s : seen)
    if (!s) throw InvalidArgument("campaign log is missing rows");
  for (std::size_t m = 0; m < n_frames; ++m) {
    log.frame_start_positions.push_back(
        position_at(log.scenario.trajectory, static_cast<double>(m) * log.scenario.timing.frame_length));
  }
  return log;
}

}  // namespace ptdoa
