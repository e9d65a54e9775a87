#pragma once

#include "mfc/assumptions.hpp"
#include "mfc/config.hpp"
#include "mfc/convergence.hpp"
#include "mfc/csv.hpp"
#include "mfc/errors.hpp"
#include "mfc/feedback.hpp"
#include "mfc/fields.hpp"
#include "mfc/functions.hpp"
#include "mfc/model.hpp"
#include "mfc/noise.hpp"
#include "mfc/riccati.hpp"
#include "mfc/sim.hpp"
#include "mfc/util.hpp"
