#pragma once

#include "mpfc/config.hpp"
#include "mpfc/controllers.hpp"
#include "mpfc/dataset.hpp"
#include "mpfc/dynamics.hpp"
#include "mpfc/geometry.hpp"
#include "mpfc/mlp.hpp"
#include "mpfc/ocp.hpp"
#include "mpfc/quant.hpp"
#include "mpfc/rng.hpp"
#include "mpfc/sim.hpp"
#include "mpfc/train.hpp"
