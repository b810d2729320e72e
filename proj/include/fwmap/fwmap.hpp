#pragma once

#include "fwmap/clock.hpp"
#include "fwmap/errors.hpp"
#include "fwmap/fw_core.hpp"
#include "fwmap/io.hpp"
#include "fwmap/matching.hpp"
#include "fwmap/model.hpp"
#include "fwmap/proximal_driver.hpp"
#include "fwmap/subgradient.hpp"
#include "fwmap/tomography.hpp"
#include "fwmap/trace.hpp"
#include "fwmap/tree_mrf.hpp"
