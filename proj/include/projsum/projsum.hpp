#pragma once

#include "projsum/core.hpp"
#include "projsum/divergent.hpp"
#include "projsum/error.hpp"
#include "projsum/finite.hpp"
#include "projsum/frames.hpp"
#include "projsum/io.hpp"
#include "projsum/linalg.hpp"
#include "projsum/pairsplit.hpp"
#include "projsum/scalar.hpp"
#include "projsum/series.hpp"
#include "projsum/tracial.hpp"
#include "projsum/twoproj.hpp"
#include "projsum/verify.hpp"
