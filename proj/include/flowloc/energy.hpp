#pragma once

#include "flowloc/graph.hpp"
#include "flowloc/rng.hpp"

namespace flowloc {

// Units: energy pJ, charge pC, voltage V, time s.
struct EnergyConfig {
  double capacity_pj = 800.0;
  double turn_on_pj = 10.0;
  double turn_off_pj = 0.0;
  double harvest_cycle_s = 0.020;
  double charge_per_cycle_pc = 6.0;
  double generator_voltage_v = 0.42;
  double tx_cost_per_pulse_pj = 1.0;
  double rx_cost_per_pulse_pj = 0.0;
  int pulses_per_packet = 16;
  double sensing_cost_pj = 1.0;

  void validate() const;
  double packet_cost_pj() const { return pulses_per_packet * tx_cost_per_pulse_pj; }
};

struct NanodeviceState {
  NodeId node = 0;
  double offset_cm = 0.0;
  double energy_pj = 0.0;
  bool powered = false;
  int event_bit = 0;
  double elapsed_since_heart_s = 0.0;
  double harvest_clock_s = 0.0;  // time accumulated towards the next harvesting cycle
};

// Advances harvesting by `dt`. Each completed cycle adds
// charge * voltage * (1 - E / capacity), which saturates at the capacity.
NanodeviceState energy_update(NanodeviceState state, const EnergyConfig& config, double dt);

// Applies the ON/OFF hysteresis to the current energy level.
void update_power(NanodeviceState& state, const EnergyConfig& config);

// Charges one sensing task; returns false without spending energy when the
// device is off or cannot afford the task.
bool consume_sensing(NanodeviceState& state, const EnergyConfig& config);

enum class TransmissionMode { injected_probability, range_gated };

// Reply to an anchor beacon. Injected mode succeeds with probability
// `p_trans` regardless of energy; range-gated mode succeeds when the device is
// on and can pay for the packet, which is then deducted.
bool attempt_transmission(NanodeviceState& state, const AnchorSpec& anchor, TransmissionMode mode,
                          double p_trans, const EnergyConfig& config, Rng& rng);

}  // namespace flowloc
