#pragma once

// Everything in one include.

#include "rwsim/core/complex.hpp"
#include "rwsim/core/dual.hpp"
#include "rwsim/core/error.hpp"
#include "rwsim/core/image.hpp"
#include "rwsim/core/parallel.hpp"
#include "rwsim/core/vec.hpp"
#include "rwsim/imaging/bayer.hpp"
#include "rwsim/imaging/distortion.hpp"
#include "rwsim/imaging/metrics.hpp"
#include "rwsim/imaging/plan.hpp"
#include "rwsim/imaging/psf_grid.hpp"
#include "rwsim/imaging/render.hpp"
#include "rwsim/imaging/resample.hpp"
#include "rwsim/io/image_io.hpp"
#include "rwsim/io/kv_format.hpp"
#include "rwsim/io/manifest.hpp"
#include "rwsim/lens/material.hpp"
#include "rwsim/lens/prescription.hpp"
#include "rwsim/lens/surface.hpp"
#include "rwsim/lens/system.hpp"
#include "rwsim/optimize/adam.hpp"
#include "rwsim/optimize/config.hpp"
#include "rwsim/optimize/fizeau.hpp"
#include "rwsim/optimize/freeform.hpp"
#include "rwsim/optimize/lens_experiment.hpp"
#include "rwsim/optimize/loop.hpp"
#include "rwsim/optimize/loss.hpp"
#include "rwsim/raytrace/aim.hpp"
#include "rwsim/raytrace/paraxial.hpp"
#include "rwsim/raytrace/ray.hpp"
#include "rwsim/validation/suites.hpp"
#include "rwsim/validation/systems.hpp"
#include "rwsim/wavefield/airy.hpp"
#include "rwsim/wavefield/psf.hpp"
#include "rwsim/wavefield/rs.hpp"
#include "rwsim/wavefield/sphere.hpp"
