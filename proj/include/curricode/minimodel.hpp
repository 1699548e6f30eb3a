#pragma once

#include "curricode/minimodel/checkpoint.hpp"
#include "curricode/minimodel/dual.hpp"
#include "curricode/minimodel/model.hpp"
#include "curricode/minimodel/vocab.hpp"
