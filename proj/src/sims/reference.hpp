#pragma once

#include <memory>

#include "protocol/registry.hpp"
#include "protocol/server.hpp"

namespace tessellate::sims {

inline constexpr std::int64_t kStepSize = 60;

// Grid with Bus entities. Creating a Grid loads a topology file and emits one
// child Bus per listed bus; Bus entities can also be created directly.
//   init params:    {topology?: path}    missing file -> "topology_not_found"
//   Bus inputs:     p_in (kW, summed over senders)
//   Bus outputs:    p_net (kW), v_pu = 1 - 0.001 * p_net
std::unique_ptr<Simulator> make_grid_sim(const SimulatorContext& ctx);

// PV and wind turbine generators: p = peak_kw * profile(t) * curtailment.
// PV profile is max(0, sin(pi * (t mod 86400) / 86400)); WT is a flat 0.6.
std::unique_ptr<Simulator> make_pv_sim(const SimulatorContext& ctx);

// Volt-var style curtailment controller (model Ctl).
std::unique_ptr<Simulator> make_controller_sim(const SimulatorContext& ctx);

// Writes every received input value as a JSON line to create_params.out_file.
std::unique_ptr<Simulator> make_collector_sim(const SimulatorContext& ctx);

// Pure helpers, exposed for tests.
double pv_profile(std::int64_t time);
double controller_curtailment(double v_pu);
double bus_voltage(double p_net);

// grid-sim, pv-sim, controller-sim, collector-sim.
BuiltinCatalog reference_catalog();

// Dispatch by builtin key; nullptr for unknown keys.
std::unique_ptr<Simulator> make_reference_sim(const std::string& key, const SimulatorContext& ctx);

}  // namespace tessellate::sims
