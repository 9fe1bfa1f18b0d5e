#pragma once

// Umbrella header.

#include "embprobe/correlation.hpp"
#include "embprobe/embedding.hpp"
#include "embprobe/error.hpp"
#include "embprobe/lexicon.hpp"
#include "embprobe/manifest.hpp"
#include "embprobe/pca.hpp"
#include "embprobe/pipeline.hpp"
#include "embprobe/probe.hpp"
#include "embprobe/report.hpp"
#include "embprobe/rng.hpp"
#include "embprobe/sgns.hpp"
#include "embprobe/synth.hpp"
