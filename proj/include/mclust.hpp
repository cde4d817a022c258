#pragma once

#include "mclust/clustering.hpp"
#include "mclust/entropy_null.hpp"
#include "mclust/grouptests.hpp"
#include "mclust/instability.hpp"
#include "mclust/market_graph.hpp"
#include "mclust/panel.hpp"
#include "mclust/pipeline.hpp"
#include "mclust/scenario.hpp"
#include "mclust/synth.hpp"
