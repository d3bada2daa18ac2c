#pragma once

#define LPCA_VERSION "0.1.0"
