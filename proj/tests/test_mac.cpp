#include <catch_amalgamated.hpp>
#include "wsnsim/wsnsim.hpp"
