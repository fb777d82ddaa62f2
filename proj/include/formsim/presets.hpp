#pragma once

// Built-in scenarios for the five-agent pentagon formation study, embedding
// the exact study parameter values (graph, targets, initial positions,
// generator matrices, gains) so runs require no transcription:
//   pentagon_known_velocity   constant reference known to every agent
//   pentagon_leader_follower  reference known to agent 1 only
//   caseI                     leader-follower with constant matched disturbances
//   caseII                    known velocity with harmonic disturbances, tree graph
//   observer_mixed            observer-based rejection of mixed disturbances

#include "formsim/scenario.hpp"

#include <string>
#include <vector>

namespace formsim {

std::vector<std::string> preset_names();
std::string preset_description(const std::string& name);
Scenario make_preset(const std::string& name);  // throws on unknown name

// Resolve "NAME" or "presets/NAME" (optionally with a .json suffix) to a
// built-in preset when no such file exists on disk. Returns true and fills
// `out` on success.
bool resolve_preset_ref(const std::string& ref, Scenario& out);

}  // namespace formsim
