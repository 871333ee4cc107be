#pragma once

#include "spikesig/analysis.hpp"
#include "spikesig/config.hpp"
#include "spikesig/corpus.hpp"
#include "spikesig/dsp.hpp"
#include "spikesig/errors.hpp"
#include "spikesig/izhikevich.hpp"
#include "spikesig/network.hpp"
#include "spikesig/parallel.hpp"
#include "spikesig/signatures.hpp"
#include "spikesig/synapse.hpp"

namespace spikesig {
inline constexpr const char *version = "0.1.0";
}
