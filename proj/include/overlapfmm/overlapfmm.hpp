#pragma once

#include "overlapfmm/costmodel.hpp"
#include "overlapfmm/engine.hpp"
#include "overlapfmm/expansion.hpp"
#include "overlapfmm/kernel.hpp"
#include "overlapfmm/particle_io.hpp"
#include "overlapfmm/quadtree.hpp"
#include "overlapfmm/scheduler.hpp"
#include "overlapfmm/types.hpp"
