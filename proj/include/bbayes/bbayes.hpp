#pragma once

#include "bbayes/config.hpp"
#include "bbayes/diagnostics.hpp"
#include "bbayes/error.hpp"
#include "bbayes/evaluate.hpp"
#include "bbayes/glm.hpp"
#include "bbayes/ingest.hpp"
#include "bbayes/json_io.hpp"
#include "bbayes/nuts.hpp"
#include "bbayes/preprocess.hpp"
#include "bbayes/pipeline.hpp"
