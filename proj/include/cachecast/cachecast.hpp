#pragma once

#include "cachecast/aggregate.hpp"
#include "cachecast/cache_node.hpp"
#include "cachecast/config.hpp"
#include "cachecast/csv.hpp"
#include "cachecast/federation.hpp"
#include "cachecast/forecast/dataset.hpp"
#include "cachecast/forecast/lstm.hpp"
#include "cachecast/forecast/model_io.hpp"
#include "cachecast/forecast/trainer.hpp"
#include "cachecast/hash.hpp"
#include "cachecast/manifest.hpp"
#include "cachecast/report.hpp"
#include "cachecast/rng.hpp"
#include "cachecast/routing.hpp"
#include "cachecast/sha256.hpp"
#include "cachecast/simulate.hpp"
#include "cachecast/telemetry_benchmark.hpp"
#include "cachecast/time.hpp"
#include "cachecast/trace.hpp"
#include "cachecast/version.hpp"
#include "cachecast/workload.hpp"
