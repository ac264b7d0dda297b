#pragma once

#include "pks/counterexample.hpp"
#include "pks/distribution.hpp"
#include "pks/errors.hpp"
#include "pks/event_space.hpp"
#include "pks/extension.hpp"
#include "pks/io.hpp"
#include "pks/simplex.hpp"
#include "pks/structure.hpp"
#include "pks/system.hpp"
