#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "flowloc/analytic_model.hpp"
#include "flowloc/energy.hpp"
#include "flowloc/graph.hpp"

namespace flowloc {

struct SimConfig {
  double dt_s = 0.01;
  double duration_s = 1100.0;
  std::size_t n_devices = 64;
  double sampling_hz = 1.0;
  double detection_radius_cm = 1.0;
  EnergyConfig energy;
  TransmissionMode transmission_mode = TransmissionMode::injected_probability;
  double p_trans = 1.0;                // used by injected mode
  std::optional<double> injected_p_det;  // per passage of the event vicinity
  std::uint64_t seed = 1;

  void validate() const;
};

// Reads fields named as in SimConfig (without unit suffixes, e.g. "dt",
// "duration", "sampling_granularity"); missing fields keep `base` values.
SimConfig sim_config_from_json(const nlohmann::json& doc, SimConfig base = {});
nlohmann::json sim_config_to_json(const SimConfig& config);

struct EventSpec {
  NodeId node = 0;
  double offset_cm = 0.0;
};

struct Reception {
  int anchor_id = 0;
  double time_s = 0.0;
  RawDatum datum;
  std::size_t device = 0;
};

struct DeviceDiagnostics {
  std::size_t loops_completed = 0;
  std::size_t detections = 0;
  std::size_t failed_transmissions = 0;
  std::size_t successful_transmissions = 0;
};

struct SimTrace {
  std::vector<Reception> receptions;  // ordered by time
  std::vector<DeviceDiagnostics> devices;
  double duration_s = 0.0;

  std::vector<RawDatum> raw_data(int anchor_id) const;
};

// Ticks every device through the graph. Devices start at the heart entry
// with a fresh report. Throws on an invalid config, a missing event node or
// a graph without a heart anchor.
SimTrace run(const BloodstreamGraph& graph, const SimConfig& config, const EventSpec& event);

// CSV: anchor_id,time_s,t_s,b with '#' metadata (duration, device count).
void write_trace_csv(const SimTrace& trace, std::ostream& out);
SimTrace read_trace_csv(std::istream& in);
void write_diagnostics_csv(const SimTrace& trace, std::ostream& out);

}  // namespace flowloc
