#pragma once

#include "semiclassic/cartan.hpp"
#include "semiclassic/cli.hpp"
#include "semiclassic/defaults.hpp"
#include "semiclassic/errors.hpp"
#include "semiclassic/lefschetz.hpp"
#include "semiclassic/linalg.hpp"
#include "semiclassic/mapping_torus.hpp"
#include "semiclassic/spectral.hpp"
#include "semiclassic/version.hpp"
