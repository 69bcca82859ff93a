#pragma once

#include "flatpack/agents.hpp"
#include "flatpack/assembly.hpp"
#include "flatpack/catalog.hpp"
#include "flatpack/collision.hpp"
#include "flatpack/digest.hpp"
#include "flatpack/env.hpp"
#include "flatpack/geom.hpp"
#include "flatpack/model.hpp"
#include "flatpack/oracle.hpp"
#include "flatpack/protocol.hpp"
#include "flatpack/record.hpp"
#include "flatpack/server.hpp"
#include "flatpack/version.hpp"
