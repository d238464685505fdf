#pragma once

#define SONIC_VERSION "0.1.0"
