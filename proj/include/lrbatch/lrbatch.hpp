#pragma once

#include "lrbatch/batch_io.hpp"
#include "lrbatch/bench.hpp"
#include "lrbatch/blr.hpp"
#include "lrbatch/common.hpp"
#include "lrbatch/dense.hpp"
#include "lrbatch/ecm.hpp"
#include "lrbatch/kernels.hpp"
#include "lrbatch/low_rank.hpp"
#include "lrbatch/machine.hpp"
#include "lrbatch/pack.hpp"
#include "lrbatch/plan.hpp"
#include "lrbatch/triad.hpp"
#include "lrbatch/verify.hpp"
