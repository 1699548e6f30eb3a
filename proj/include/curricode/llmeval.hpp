#pragma once

#include "curricode/llmeval/chat.hpp"
#include "curricode/llmeval/prompts.hpp"
#include "curricode/llmeval/study.hpp"
