#pragma once

// Everything except the HTTP service and the CLI, which pull in httplib and
// CLI11; include rsgan/service.hpp or rsgan/cli.hpp for those.

#include "rsgan/applications.hpp"
#include "rsgan/autodiff.hpp"
#include "rsgan/checkpoint.hpp"
#include "rsgan/dataset.hpp"
#include "rsgan/evaluation.hpp"
#include "rsgan/geometry.hpp"
#include "rsgan/image.hpp"
#include "rsgan/losses.hpp"
#include "rsgan/metrics.hpp"
#include "rsgan/networks.hpp"
#include "rsgan/optimizer.hpp"
#include "rsgan/png_io.hpp"
#include "rsgan/poisson.hpp"
#include "rsgan/sample.hpp"
#include "rsgan/synth.hpp"
#include "rsgan/tensor.hpp"
#include "rsgan/trainer.hpp"
