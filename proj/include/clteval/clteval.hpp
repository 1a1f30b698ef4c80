#pragma once

// Umbrella header: pulls in the full library.

#include "clteval/analysis.hpp"
#include "clteval/corpus.hpp"
#include "clteval/generation.hpp"
#include "clteval/metrics.hpp"
#include "clteval/mt_client.hpp"
#include "clteval/pipeline.hpp"
#include "clteval/prompt.hpp"
#include "clteval/report.hpp"
#include "clteval/runner.hpp"
#include "clteval/text.hpp"
#include "clteval/util.hpp"
