#pragma once

#include "wavesim/aodv.hpp"
#include "wavesim/apps.hpp"
#include "wavesim/config.hpp"
#include "wavesim/engine.hpp"
#include "wavesim/frame.hpp"
#include "wavesim/mac.hpp"
#include "wavesim/metrics.hpp"
#include "wavesim/mobility.hpp"
#include "wavesim/network.hpp"
#include "wavesim/packet.hpp"
#include "wavesim/phy.hpp"
#include "wavesim/scenario.hpp"

namespace wavesim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace wavesim
