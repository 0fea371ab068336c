#pragma once

#include "hardball/core.hpp"
#include "hardball/state.hpp"
#include "hardball/dynamics.hpp"
#include "hardball/log_io.hpp"
#include "hardball/frame.hpp"
#include "hardball/tree.hpp"
#include "hardball/bounds.hpp"
#include "hardball/scenario.hpp"
#include "hardball/checks.hpp"
#include "hardball/harness.hpp"
