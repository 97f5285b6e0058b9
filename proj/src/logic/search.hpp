// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "lsx/logic.hpp"

namespace lsx::logic {

// scores is [objects, slots] row-major.
Assignment search_assignment(const std::vector<double>& scores, std::size_t objects, std::size_t slots);

}  // namespace lsx::logic
