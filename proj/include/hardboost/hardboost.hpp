#pragma once

#include "hardboost/analysis.hpp"
#include "hardboost/base.hpp"
#include "hardboost/bench.hpp"
#include "hardboost/config.hpp"
#include "hardboost/error.hpp"
#include "hardboost/eval.hpp"
#include "hardboost/hardness.hpp"
#include "hardboost/hars.hpp"
#include "hardboost/harst.hpp"
#include "hardboost/io.hpp"
#include "hardboost/models.hpp"
#include "hardboost/random.hpp"
#include "hardboost/synth_set.hpp"
#include "hardboost/types.hpp"
#include "hardboost/validate.hpp"
