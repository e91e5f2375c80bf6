#pragma once

// Umbrella header.

#include "das/acceptance.hpp"
#include "das/core.hpp"
#include "das/evaluation.hpp"
#include "das/io.hpp"
#include "das/learning.hpp"
#include "das/oracle.hpp"
#include "das/parallel.hpp"
#include "das/pricing.hpp"
#include "das/random.hpp"
#include "das/simulator.hpp"
#include "das/solver.hpp"
#include "das/structure.hpp"
#include "das/tabular.hpp"
#include "das/whittle.hpp"
