#include "flowloc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "flowloc/error.hpp"
#include "flowloc/rng.hpp"

namespace flowloc {

void SimConfig::validate() const {
  if (!(dt_s > 0.0)) throw ParameterError("dt must be positive");
  if (!(duration_s > 0.0)) throw ParameterError("duration must be positive");
  if (n_devices < 1) throw ParameterError("device count must be at least 1");
  if (!(sampling_hz > 0.0)) throw ParameterError("sampling granularity must be positive");
  if (!(detection_radius_cm > 0.0)) throw ParameterError("detection radius must be positive");
  if (!(p_trans >= 0.0 && p_trans <= 1.0)) throw ParameterError("P_trans must lie in [0, 1]");
  if (injected_p_det && !(*injected_p_det >= 0.0 && *injected_p_det <= 1.0))
    throw ParameterError("injected P_det must lie in [0, 1]");
  energy.validate();
}

SimConfig sim_config_from_json(const nlohmann::json& doc, SimConfig c) {
  try {
    c.dt_s = doc.value("dt", c.dt_s);
    c.duration_s = doc.value("duration", c.duration_s);
    c.n_devices = doc.value("n_devices", c.n_devices);
    c.sampling_hz = doc.value("sampling_granularity", c.sampling_hz);
    c.detection_radius_cm = doc.value("detection_radius", c.detection_radius_cm);
    c.p_trans = doc.value("p_trans", c.p_trans);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("injected_p_det")) {
      const auto& v = doc.at("injected_p_det");
      c.injected_p_det = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    }
    if (doc.contains("transmission_mode")) {
      auto mode = doc.at("transmission_mode").get<std::string>();
      if (mode == "injected_probability")
        c.transmission_mode = TransmissionMode::injected_probability;
      else if (mode == "range_gated")
        c.transmission_mode = TransmissionMode::range_gated;
      else
        throw FormatError(fmt::format("unknown transmission_mode \"{}\"", mode));
    }
    if (doc.contains("energy")) {
      const auto& e = doc.at("energy");
      auto& en = c.energy;
      en.capacity_pj = e.value("capacity", en.capacity_pj);
      en.turn_on_pj = e.value("turn_on", en.turn_on_pj);
      en.turn_off_pj = e.value("turn_off", en.turn_off_pj);
      en.harvest_cycle_s = e.value("harvest_cycle", en.harvest_cycle_s * 1e3) * 1e-3;
      en.charge_per_cycle_pc = e.value("charge_per_cycle", en.charge_per_cycle_pc);
      en.generator_voltage_v = e.value("generator_voltage", en.generator_voltage_v);
      en.tx_cost_per_pulse_pj = e.value("tx_cost_per_pulse", en.tx_cost_per_pulse_pj);
      en.rx_cost_per_pulse_pj = e.value("rx_cost_per_pulse", en.rx_cost_per_pulse_pj);
      en.pulses_per_packet = e.value("pulses_per_packet", en.pulses_per_packet);
      en.sensing_cost_pj = e.value("sensing_cost", en.sensing_cost_pj);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed simulation config: ") + e.what());
  }
  return c;
}

nlohmann::json sim_config_to_json(const SimConfig& c) {
  nlohmann::json energy{{"capacity", c.energy.capacity_pj},
                        {"turn_on", c.energy.turn_on_pj},
                        {"turn_off", c.energy.turn_off_pj},
                        {"harvest_cycle", c.energy.harvest_cycle_s * 1e3},
                        {"charge_per_cycle", c.energy.charge_per_cycle_pc},
                        {"generator_voltage", c.energy.generator_voltage_v},
                        {"tx_cost_per_pulse", c.energy.tx_cost_per_pulse_pj},
                        {"rx_cost_per_pulse", c.energy.rx_cost_per_pulse_pj},
                        {"pulses_per_packet", c.energy.pulses_per_packet},
                        {"sensing_cost", c.energy.sensing_cost_pj}};
  return {{"dt", c.dt_s},
          {"duration", c.duration_s},
          {"n_devices", c.n_devices},
          {"sampling_granularity", c.sampling_hz},
          {"detection_radius", c.detection_radius_cm},
          {"energy", energy},
          {"transmission_mode", c.transmission_mode == TransmissionMode::range_gated
                                    ? "range_gated"
                                    : "injected_probability"},
          {"p_trans", c.p_trans},
          {"injected_p_det", c.injected_p_det ? nlohmann::json(*c.injected_p_det) : nullptr},
          {"seed", c.seed}};
}

std::vector<RawDatum> SimTrace::raw_data(int anchor_id) const {
  std::vector<RawDatum> out;
  for (const auto& r : receptions)
    if (r.anchor_id == anchor_id) out.push_back(r.datum);
  return out;
}

namespace {

struct NodeInfo {
  NodeId id;
  double length;
  double speed;
  std::vector<std::size_t> next;      // successor indices
  std::vector<double> next_cumulative;
  std::vector<std::size_t> anchors;   // indices into graph.anchors()
};

struct Device {
  NanodeviceState state;
  std::size_t node = 0;
  double reset_time = 0.0;
  double next_sample = 0.0;
  bool vicinity_drawn = false;  // injected P_det already drawn this passage
  std::vector<std::size_t> pending;  // range-gated anchors still to reach this passage
  Rng rng;
  DeviceDiagnostics diag;
};

class Simulation {
 public:
  Simulation(const BloodstreamGraph& graph, const SimConfig& config, const EventSpec& event)
      : graph_(graph), config_(config), event_(event) {
    config_.validate();
    if (!graph.contains(event.node))
      throw GraphError(fmt::format("event node {} missing from graph", event.node));
    const auto& ev = graph.node(event.node);
    if (!(event.offset_cm >= 0.0 && event.offset_cm < ev.length_cm))
      throw ParameterError(fmt::format("event offset {} outside node {}", event.offset_cm, ev.id));
    auto heart_anchor = graph.heart_anchor();
    if (!heart_anchor) throw GraphError("graph has no heart anchor");
    heart_anchor_id_ = heart_anchor->id;

    for (const auto& n : graph.nodes()) {
      NodeInfo info{n.id, n.length_cm, n.blood_speed_cm_s, {}, {}, {}};
      double acc = 0.0;
      for (const auto& s : graph.successors(n.id)) {
        info.next.push_back(graph.index_of(s.to));
        acc += s.weight;
        info.next_cumulative.push_back(acc);
      }
      nodes_.push_back(std::move(info));
    }
    for (std::size_t a = 0; a < graph.anchors().size(); ++a)
      nodes_[graph.index_of(graph.anchors()[a].attached_node)].anchors.push_back(a);
    heart_ = graph.index_of(graph.heart());
    event_index_ = graph.index_of(event.node);
  }

  SimTrace run() {
    const double sample_period = 1.0 / config_.sampling_hz;
    devices_.resize(config_.n_devices);
    for (std::size_t d = 0; d < devices_.size(); ++d) {
      auto& dev = devices_[d];
      dev.rng.seed(derive_seed(config_.seed, {d}));
      dev.node = heart_;
      dev.state.node = graph_.heart();
      dev.next_sample = uniform01(dev.rng) * sample_period;
    }

    const auto steps = static_cast<std::size_t>(std::ceil(config_.duration_s / config_.dt_s - 1e-9));
    for (std::size_t k = 0; k < steps; ++k) {
      const double t0 = static_cast<double>(k) * config_.dt_s;
      const double t1 = std::min(static_cast<double>(k + 1) * config_.dt_s, config_.duration_s);
      for (std::size_t d = 0; d < devices_.size(); ++d) advance(d, t0, t1, sample_period);
    }

    std::stable_sort(trace_.receptions.begin(), trace_.receptions.end(),
                     [](const Reception& a, const Reception& b) {
                       if (a.time_s != b.time_s) return a.time_s < b.time_s;
                       return a.device < b.device;
                     });
    trace_.duration_s = config_.duration_s;
    for (auto& dev : devices_) trace_.devices.push_back(dev.diag);
    return std::move(trace_);
  }

 private:
  void advance(std::size_t d, double t0, double t1, double sample_period) {
    auto& dev = devices_[d];
    dev.state = energy_update(dev.state, config_.energy, t1 - t0);

    double remaining = t1 - t0;
    double now = t0;
    while (remaining > 0.0) {
      const auto& node = nodes_[dev.node];
      const double time_to_end = (node.length - dev.state.offset_cm) / node.speed;
      if (time_to_end > remaining) {
        dev.state.offset_cm += node.speed * remaining;
        now = t1;
        remaining = 0.0;
      } else {
        now += time_to_end;
        remaining -= time_to_end;
        enter(d, choose_next(dev, node), now);
      }
    }

    if (!dev.pending.empty()) retry_pending(d, t1);

    while (dev.next_sample <= t1) {
      dev.next_sample += sample_period;
      sense(dev);
    }
    dev.state.elapsed_since_heart_s = t1 - dev.reset_time;
  }

  std::size_t choose_next(Device& dev, const NodeInfo& node) {
    if (node.next.size() == 1) return node.next.front();
    double u = uniform01(dev.rng) * node.next_cumulative.back();
    auto it = std::upper_bound(node.next_cumulative.begin(), node.next_cumulative.end(), u);
    auto i = std::min<std::size_t>(static_cast<std::size_t>(it - node.next_cumulative.begin()),
                                   node.next.size() - 1);
    return node.next[i];
  }

  void enter(std::size_t d, std::size_t node_index, double now) {
    auto& dev = devices_[d];
    dev.node = node_index;
    dev.state.node = nodes_[node_index].id;
    dev.state.offset_cm = 0.0;
    dev.vicinity_drawn = false;
    dev.pending.clear();
    if (node_index == heart_) ++dev.diag.loops_completed;
    for (auto a : nodes_[node_index].anchors) {
      if (!try_report(d, a, now) && config_.transmission_mode == TransmissionMode::range_gated)
        dev.pending.push_back(a);
    }
  }

  void retry_pending(std::size_t d, double now) {
    auto& dev = devices_[d];
    std::vector<std::size_t> still;
    for (auto a : dev.pending) {
      if (dev.state.offset_cm > graph_.anchors()[a].range_cm) continue;  // left the range
      if (!try_report(d, a, now)) still.push_back(a);
    }
    dev.pending = std::move(still);
  }

  bool try_report(std::size_t d, std::size_t anchor_index, double now) {
    auto& dev = devices_[d];
    const auto& anchor = graph_.anchors()[anchor_index];
    bool ok = attempt_transmission(dev.state, anchor, config_.transmission_mode, config_.p_trans,
                                   config_.energy, dev.rng);
    if (!ok) {
      ++dev.diag.failed_transmissions;
      return false;
    }
    ++dev.diag.successful_transmissions;
    RawDatum datum{quantize_time(now - dev.reset_time), dev.state.event_bit};
    trace_.receptions.push_back({anchor.id, quantize_time(now), datum, d});
    if (anchor.id == heart_anchor_id_) {
      dev.reset_time = now;
      dev.state.event_bit = 0;
    }
    return true;
  }

  void sense(Device& dev) {
    if (!consume_sensing(dev.state, config_.energy)) return;
    if (dev.node != event_index_) return;
    if (std::abs(dev.state.offset_cm - event_.offset_cm) > config_.detection_radius_cm) return;
    if (config_.injected_p_det) {
      if (dev.vicinity_drawn) return;
      dev.vicinity_drawn = true;
      if (!bernoulli(dev.rng, *config_.injected_p_det)) return;
    }
    if (dev.state.event_bit == 0) ++dev.diag.detections;
    dev.state.event_bit = 1;
  }

  const BloodstreamGraph& graph_;
  SimConfig config_;
  EventSpec event_;
  std::vector<NodeInfo> nodes_;
  std::vector<Device> devices_;
  std::size_t heart_ = 0;
  std::size_t event_index_ = 0;
  int heart_anchor_id_ = 0;
  SimTrace trace_;
};

}  // namespace

SimTrace run(const BloodstreamGraph& graph, const SimConfig& config, const EventSpec& event) {
  return Simulation(graph, config, event).run();
}

void write_trace_csv(const SimTrace& trace, std::ostream& out) {
  out << "# flowloc simulation trace\n";
  out << fmt::format("# duration_s={}\n# n_devices={}\n", trace.duration_s, trace.devices.size());
  out << "anchor_id,time_s,t_s,b\n";
  for (const auto& r : trace.receptions)
    out << fmt::format("{},{},{},{}\n", r.anchor_id, r.time_s, r.datum.t_s, r.datum.b);
}

void write_diagnostics_csv(const SimTrace& trace, std::ostream& out) {
  out << "device,loops_completed,detections,failed_transmissions,successful_transmissions\n";
  for (std::size_t d = 0; d < trace.devices.size(); ++d) {
    const auto& g = trace.devices[d];
    out << fmt::format("{},{},{},{},{}\n", d, g.loops_completed, g.detections,
                       g.failed_transmissions, g.successful_transmissions);
  }
}

SimTrace read_trace_csv(std::istream& in) {
  SimTrace trace;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto key = line.substr(2, eq - 2);
      auto value = line.substr(eq + 1);
      try {
        if (key == "duration_s") trace.duration_s = std::stod(value);
        if (key == "n_devices") trace.devices.resize(std::stoul(value));
      } catch (const std::exception&) {
        throw FormatError(fmt::format("trace line {}: bad metadata", line_no));
      }
      continue;
    }
    if (!header_seen) {
      if (line != "anchor_id,time_s,t_s,b")
        throw FormatError(fmt::format("trace line {}: unexpected header", line_no));
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    Reception r;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(row >> r.anchor_id >> c1 >> r.time_s >> c2 >> r.datum.t_s >> c3 >> r.datum.b) ||
        c1 != ',' || c2 != ',' || c3 != ',' || (r.datum.b != 0 && r.datum.b != 1))
      throw FormatError(fmt::format("trace line {}: malformed record", line_no));
    trace.receptions.push_back(r);
  }
  if (!header_seen) throw FormatError("trace has no header");
  return trace;
}

}  // namespace flowloc
