#pragma once

// Umbrella header.

#include "stomakit/agreement.hpp"
#include "stomakit/annot.hpp"
#include "stomakit/error.hpp"
#include "stomakit/evaldet.hpp"
#include "stomakit/gray_image.hpp"
#include "stomakit/netops.hpp"
#include "stomakit/phenotype.hpp"
#include "stomakit/quality.hpp"
#include "stomakit/random.hpp"
#include "stomakit/rotated_box.hpp"
#include "stomakit/rotgeom.hpp"
#include "stomakit/synth.hpp"
