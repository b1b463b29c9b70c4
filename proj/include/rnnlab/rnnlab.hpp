#pragma once

// Umbrella header for the whole library.

#include "adam.hpp"
#include "bptt.hpp"
#include "checkpoint.hpp"
#include "csv.hpp"
#include "eprop.hpp"
#include "experiment.hpp"
#include "flossing.hpp"
#include "gradients.hpp"
#include "io.hpp"
#include "loss.hpp"
#include "lyapunov.hpp"
#include "matrix.hpp"
#include "qr.hpp"
#include "rng.hpp"
#include "rnn.hpp"
#include "stats.hpp"
#include "svg_plot.hpp"
#include "tasks.hpp"
