#pragma once

#include "auxol/errors.hpp"
#include "auxol/grid.hpp"
#include "auxol/geometry.hpp"
#include "auxol/metrics.hpp"
#include "auxol/rng.hpp"
#include "auxol/fusion.hpp"
#include "auxol/online_batch.hpp"
#include "auxol/aux_model.hpp"
#include "auxol/adamw.hpp"
#include "auxol/codec.hpp"
#include "auxol/generalist.hpp"
#include "auxol/record.hpp"
#include "auxol/data.hpp"
#include "auxol/engine.hpp"
#include "auxol/checkpoint.hpp"
#include "auxol/summary.hpp"
#include "auxol/service.hpp"
#include "auxol/cli.hpp"
