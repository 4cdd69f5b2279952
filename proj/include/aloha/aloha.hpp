// Umbrella header.
#pragma once

#include "aloha/model.hpp"
#include "aloha/closed_form.hpp"
#include "aloha/inclusion_exclusion.hpp"
#include "aloha/enumerate.hpp"
#include "aloha/optimizer.hpp"
#include "aloha/simulator.hpp"
#include "aloha/io.hpp"
#include "aloha/reproduce.hpp"
