#pragma once

#include "silva/aggregation.hpp"
#include "silva/cky.hpp"
#include "silva/core.hpp"
#include "silva/evaluation.hpp"
#include "silva/format.hpp"
#include "silva/ingest.hpp"
#include "silva/rng.hpp"
#include "silva/synthetic.hpp"
#include "silva/treebank.hpp"
