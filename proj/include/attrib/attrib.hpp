#pragma once

#include "attrib/classical_tests.hpp"
#include "attrib/core.hpp"
#include "attrib/decision_rules.hpp"
#include "attrib/distributions.hpp"
#include "attrib/eof_basis.hpp"
#include "attrib/errors.hpp"
#include "attrib/io.hpp"
#include "attrib/mcmc.hpp"
#include "attrib/models.hpp"
#include "attrib/random.hpp"
#include "attrib/simstudy.hpp"
#include "attrib/synthetic.hpp"

namespace attrib {

inline constexpr const char* kVersion = "1.0.0";

} // namespace attrib
