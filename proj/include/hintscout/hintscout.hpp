#pragma once

#include "hintscout/distill.hpp"
#include "hintscout/dump.hpp"
#include "hintscout/errors.hpp"
#include "hintscout/hint_selection.hpp"
#include "hintscout/kmeans.hpp"
#include "hintscout/layer_repr.hpp"
#include "hintscout/loss_checks.hpp"
#include "hintscout/similarity.hpp"
#include "hintscout/tensor_blob.hpp"
