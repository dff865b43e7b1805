#pragma once

#include "sdmc/error.hpp"
#include "sdmc/weights.hpp"
#include "sdmc/linalg.hpp"
#include "sdmc/panel.hpp"
#include "sdmc/estimator.hpp"
#include "sdmc/inference.hpp"
#include "sdmc/effects.hpp"
#include "sdmc/dgp.hpp"
#include "sdmc/io.hpp"
#include "sdmc/serialize.hpp"
#include "sdmc/report.hpp"
