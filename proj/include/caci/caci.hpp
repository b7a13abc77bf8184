#pragma once

#include "caci/auction.hpp"
#include "caci/context_space.hpp"
#include "caci/csv.hpp"
#include "caci/error.hpp"
#include "caci/mechanisms.hpp"
#include "caci/population.hpp"
#include "caci/quality.hpp"
#include "caci/simulation.hpp"
#include "caci/trace.hpp"
#include "caci/verification.hpp"
