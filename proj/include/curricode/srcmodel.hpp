#pragma once

#include "curricode/srcmodel/ast.hpp"
#include "curricode/srcmodel/function_model.hpp"
#include "curricode/srcmodel/lexer.hpp"
#include "curricode/srcmodel/parser.hpp"
#include "curricode/srcmodel/scope.hpp"
#include "curricode/srcmodel/token.hpp"
