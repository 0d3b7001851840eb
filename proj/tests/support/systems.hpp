#pragma once

#include "rwsim/validation/systems.hpp"

namespace rwsim::testing {

using validation::ideal_lens;
using validation::make_surface;
using validation::seed_singlet;
using validation::two_element;

}  // namespace rwsim::testing
