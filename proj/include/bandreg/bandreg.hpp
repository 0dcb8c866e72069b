#pragma once

#include "bandreg/core.hpp"
#include "bandreg/fft.hpp"
#include "bandreg/fields.hpp"
#include "bandreg/freq_algebra.hpp"
#include "bandreg/shooting.hpp"
#include "bandreg/shooting_kernel.hpp"
#include "bandreg/registration.hpp"
#include "bandreg/bulleye.hpp"
#include "bandreg/dualnet.hpp"
#include "bandreg/io.hpp"
#include "bandreg/config.hpp"
#include "bandreg/dataset.hpp"
#include "bandreg/metrics.hpp"
