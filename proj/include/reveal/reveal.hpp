#pragma once

// Retrieve-and-verify column annotation: MMR context retrieval, a
// role-aware column encoder, and verifier-guided context refinement.

#include "reveal/checkpoint.hpp"
#include "reveal/common.hpp"
#include "reveal/config.hpp"
#include "reveal/embed.hpp"
#include "reveal/encode.hpp"
#include "reveal/infer.hpp"
#include "reveal/metrics.hpp"
#include "reveal/nnkernel.hpp"
#include "reveal/pipeline.hpp"
#include "reveal/retrieve.hpp"
#include "reveal/tabledata.hpp"
#include "reveal/verify.hpp"
