#include "flowloc/energy.hpp"

#include <algorithm>

#include "flowloc/error.hpp"

namespace flowloc {

void EnergyConfig::validate() const {
  if (!(capacity_pj > 0.0)) throw ParameterError("energy capacity must be positive");
  if (!(turn_off_pj >= 0.0 && turn_off_pj < turn_on_pj && turn_on_pj <= capacity_pj))
    throw ParameterError("energy thresholds must satisfy 0 <= turn_off < turn_on <= capacity");
  if (!(harvest_cycle_s > 0.0)) throw ParameterError("harvesting cycle must be positive");
  if (charge_per_cycle_pc < 0.0 || generator_voltage_v < 0.0 || tx_cost_per_pulse_pj < 0.0 ||
      rx_cost_per_pulse_pj < 0.0 || sensing_cost_pj < 0.0 || pulses_per_packet < 0)
    throw ParameterError("energy costs and harvest terms must be non-negative");
}

void update_power(NanodeviceState& state, const EnergyConfig& config) {
  if (!state.powered && state.energy_pj >= config.turn_on_pj) state.powered = true;
  if (state.powered && state.energy_pj <= config.turn_off_pj) state.powered = false;
}

NanodeviceState energy_update(NanodeviceState state, const EnergyConfig& config, double dt) {
  state.harvest_clock_s += dt;
  const double full_gain = config.charge_per_cycle_pc * config.generator_voltage_v;
  // Tolerance keeps a cycle from being lost to rounding of accumulated ticks.
  while (state.harvest_clock_s >= config.harvest_cycle_s - 1e-12) {
    state.harvest_clock_s = std::max(0.0, state.harvest_clock_s - config.harvest_cycle_s);
    double gain = full_gain * (1.0 - state.energy_pj / config.capacity_pj);
    state.energy_pj = std::min(config.capacity_pj, state.energy_pj + std::max(0.0, gain));
  }
  update_power(state, config);
  return state;
}

bool consume_sensing(NanodeviceState& state, const EnergyConfig& config) {
  if (!state.powered || state.energy_pj < config.sensing_cost_pj) return false;
  state.energy_pj -= config.sensing_cost_pj;
  update_power(state, config);
  return true;
}

bool attempt_transmission(NanodeviceState& state, const AnchorSpec&, TransmissionMode mode,
                          double p_trans, const EnergyConfig& config, Rng& rng) {
  if (mode == TransmissionMode::injected_probability) return bernoulli(rng, p_trans);

  const double beacon = config.pulses_per_packet * config.rx_cost_per_pulse_pj;
  state.energy_pj = std::max(0.0, state.energy_pj - beacon);
  update_power(state, config);
  const double cost = config.packet_cost_pj();
  if (!state.powered || state.energy_pj < cost) return false;
  state.energy_pj -= cost;
  update_power(state, config);
  return true;
}

}  // namespace flowloc
