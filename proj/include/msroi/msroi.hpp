#pragma once

// Convenience umbrella header.

#include "msroi/benchmark.hpp"
#include "msroi/config.hpp"
#include "msroi/image.hpp"
#include "msroi/jpeg.hpp"
#include "msroi/metrics.hpp"
#include "msroi/network.hpp"
#include "msroi/semantic.hpp"
#include "msroi/synthetic.hpp"
#include "msroi/tensor.hpp"
