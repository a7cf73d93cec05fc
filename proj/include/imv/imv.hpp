#pragma once

#include "core.hpp"
#include "scene.hpp"
#include "scene_io.hpp"
#include "projection.hpp"
#include "synthesis.hpp"
#include "bitstream.hpp"
#include "rdcurve.hpp"
#include "codec.hpp"
#include "navmodel.hpp"
#include "rdalloc.hpp"
#include "transmission.hpp"
#include "store.hpp"
#include "session.hpp"
#include "gop_select.hpp"
#include "protocol.hpp"
#include "server.hpp"
#include "experiments.hpp"
