#pragma once

// Umbrella header: trains, quantizes, tiles, emits and simulates spiking
// networks for the 16x16-tile integer accelerator.

#include "spiketile/behavioral.hpp"
#include "spiketile/cyclesim.hpp"
#include "spiketile/encode.hpp"
#include "spiketile/errors.hpp"
#include "spiketile/idx.hpp"
#include "spiketile/memimage.hpp"
#include "spiketile/network.hpp"
#include "spiketile/parity.hpp"
#include "spiketile/pipeline.hpp"
#include "spiketile/quantize.hpp"
#include "spiketile/serialize.hpp"
#include "spiketile/tiles.hpp"
#include "spiketile/trainer.hpp"
