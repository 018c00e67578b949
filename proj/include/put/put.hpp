#pragma once

#include "put/atlas.hpp"
#include "put/atlas_io.hpp"
#include "put/bvh.hpp"
#include "put/demo_scene.hpp"
#include "put/image.hpp"
#include "put/math.hpp"
#include "put/metrics.hpp"
#include "put/parallel.hpp"
#include "put/pipeline.hpp"
#include "put/png_io.hpp"
#include "put/projection.hpp"
#include "put/propagation.hpp"
#include "put/protocol.hpp"
#include "put/render.hpp"
#include "put/scene.hpp"
#include "put/translator.hpp"
#include "put/viewpath.hpp"
