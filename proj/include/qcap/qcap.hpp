// Umbrella header for the numerics.  io.hpp and report.hpp are included
// separately since they pull in JSON and libcrypto.
#pragma once

#include "qcap/linalg.hpp"
#include "qcap/state.hpp"
#include "qcap/random.hpp"
#include "qcap/parallel.hpp"
#include "qcap/channels.hpp"
#include "qcap/recovery.hpp"
#include "qcap/power.hpp"
#include "qcap/decoupling.hpp"
#include "qcap/typicality.hpp"
#include "qcap/capacity.hpp"
#include "qcap/verifier.hpp"
