#include <doctest.h>

#include "dhtsim/sim/scenario.hpp"
