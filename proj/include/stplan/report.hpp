#pragma once

#include <ostream>
#include <vector>

#include "stplan/sim.hpp"

namespace stplan::sim {

/// CSV writers shared by the CLI and the tests. Numbers use %.9g.
void write_cycles_csv(std::ostream& out, const std::vector<CycleLog>& cycles);
void write_profiles_csv(std::ostream& out, const std::vector<ProfileSnapshot>& snapshots);
/// One plan: arc length is absolute along the reference.
void write_profile_csv(std::ostream& out, const Plan& plan);
void write_path_csv(std::ostream& out, const Plan& plan, const path::ReferenceLine& reference);

}  // namespace stplan::sim
