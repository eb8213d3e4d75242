#pragma once

#include "qmix/data.hpp"
#include "qmix/design.hpp"
#include "qmix/errors.hpp"
#include "qmix/io.hpp"
#include "qmix/mcharness.hpp"
#include "qmix/parallel.hpp"
#include "qmix/qgc.hpp"
#include "qmix/quantize.hpp"
#include "qmix/regress.hpp"
#include "qmix/rng.hpp"
#include "qmix/simgen.hpp"
#include "qmix/version.hpp"
#include "qmix/wqs.hpp"
