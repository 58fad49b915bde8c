#pragma once

#include "core.hpp"
#include "interval_maps.hpp"
#include "inducing.hpp"
#include "cocycles.hpp"
#include "operators.hpp"
#include "renewal.hpp"
#include "tower.hpp"
#include "correlations.hpp"
#include "eigen_probes.hpp"
