#pragma once

#include "cltrack/augment.hpp"
#include "cltrack/cli.hpp"
#include "cltrack/config.hpp"
#include "cltrack/dataset.hpp"
#include "cltrack/error.hpp"
#include "cltrack/geometry.hpp"
#include "cltrack/image.hpp"
#include "cltrack/loss.hpp"
#include "cltrack/nn/adam.hpp"
#include "cltrack/nn/checkpoint.hpp"
#include "cltrack/nn/layers.hpp"
#include "cltrack/nn/ops.hpp"
#include "cltrack/nn/params.hpp"
#include "cltrack/nn/tape.hpp"
#include "cltrack/nn/tensor.hpp"
#include "cltrack/protocol.hpp"
#include "cltrack/random.hpp"
#include "cltrack/report.hpp"
#include "cltrack/synth.hpp"
#include "cltrack/tracker/model.hpp"
#include "cltrack/tracker/session.hpp"
#include "cltrack/tracker/train.hpp"
#include "cltrack/vot_io.hpp"
