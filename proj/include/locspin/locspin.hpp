#pragma once

#include "locspin/aklt.hpp"
#include "locspin/analysis.hpp"
#include "locspin/defect.hpp"
#include "locspin/io.hpp"
#include "locspin/linalg.hpp"
#include "locspin/mps_tensor.hpp"
#include "locspin/spin.hpp"
#include "locspin/transfer.hpp"
#include "locspin/uniform_mps.hpp"
#include "locspin/vumps.hpp"
#include "locspin/window.hpp"
