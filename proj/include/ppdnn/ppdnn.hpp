#pragma once

#include "ppdnn/core.hpp"
#include "ppdnn/similarity.hpp"
#include "ppdnn/tracker.hpp"
#include "ppdnn/roi.hpp"
#include "ppdnn/flops.hpp"
#include "ppdnn/keyframe.hpp"
#include "ppdnn/dispatch.hpp"
#include "ppdnn/predictor.hpp"
#include "ppdnn/fusion.hpp"
#include "ppdnn/traceio.hpp"
#include "ppdnn/sim.hpp"
#include "ppdnn/eval.hpp"
#include "ppdnn/config.hpp"
