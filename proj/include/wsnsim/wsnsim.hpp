#pragma once

#include "wsnsim/channel.hpp"
#include "wsnsim/config.hpp"
#include "wsnsim/energy.hpp"
#include "wsnsim/flash.hpp"
#include "wsnsim/frame.hpp"
#include "wsnsim/kernel.hpp"
#include "wsnsim/mac.hpp"
#include "wsnsim/network.hpp"
#include "wsnsim/phase.hpp"
#include "wsnsim/rng.hpp"
#include "wsnsim/routing.hpp"
#include "wsnsim/runner.hpp"
#include "wsnsim/sim_time.hpp"
#include "wsnsim/topology.hpp"
